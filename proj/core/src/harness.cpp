#include "dm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dm/rng.hpp"

namespace dm {

std::string WeightScheme::name() const {
    switch (kind) {
        case SchemeKind::Loss: return loss_name(loss);
        case SchemeKind::LossDN: return loss_name(loss) + "-DN";
        case SchemeKind::DmEdf: return "DM-" + family.name();
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

struct KvMap {
    std::map<std::string, std::string> kv;
    mutable std::map<std::string, bool> used;

    bool has(const std::string& k) const { return kv.count(k) != 0; }
    std::string get(const std::string& k, const std::string& fallback) const {
        auto it = kv.find(k);
        if (it == kv.end()) return fallback;
        used[k] = true;
        return it->second;
    }
    std::string require(const std::string& k) const {
        auto it = kv.find(k);
        if (it == kv.end()) throw std::invalid_argument("config: missing key '" + k + "'");
        used[k] = true;
        return it->second;
    }
    double get_d(const std::string& k, double fallback) const {
        auto it = kv.find(k);
        if (it == kv.end()) return fallback;
        used[k] = true;
        return std::stod(it->second);
    }
    std::uint64_t get_u(const std::string& k, std::uint64_t fallback) const {
        auto it = kv.find(k);
        if (it == kv.end()) return fallback;
        used[k] = true;
        return std::stoull(it->second);
    }
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

KvMap parse_kv(const std::string& text) {
    KvMap m;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config: empty key at line " + std::to_string(lineno));
        m.kv[key] = val;
    }
    return m;
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, sep)) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(cell);
    }
    return out;
}

LossKind parse_loss(const std::string& name, double q) {
    if (name == "cce") return LossKind::cce();
    if (name == "mae") return LossKind::mae();
    if (name == "mse") return LossKind::mse();
    if (name == "gce") return LossKind::gce(q);
    throw std::invalid_argument("config: unknown loss '" + name + "'");
}

EdfFamily parse_family(const KvMap& m) {
    std::string fam = m.get("edf.family", "unified");
    if (fam == "unified")
        return EdfFamily::unified(m.get_d("edf.lambda", 0.0), m.get_d("edf.beta", 0.0));
    if (fam == "ed") return EdfFamily::ed(m.get_d("edf.beta", 0.0));
    if (fam == "nd") return EdfFamily::nd(m.get_d("edf.psi", 0.5), m.get_d("edf.beta", 0.0));
    if (fam == "bd") return EdfFamily::bd(m.get_d("edf.alpha", 1.0), m.get_d("edf.eta", 1.0));
    if (fam == "from_loss")
        return EdfFamily::from_loss(parse_loss(m.get("edf.loss", "cce"), m.get_d("edf.q", 0.7)));
    throw std::invalid_argument("config: unknown edf.family '" + fam + "'");
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    KvMap m = parse_kv(text);
    RunConfig cfg;

    std::string dk = m.get("dataset.kind", "synthetic");
    if (dk == "synthetic") {
        cfg.source.kind = DatasetSource::Kind::Synthetic;
        cfg.source.synthetic.class_count = m.get_u("synthetic.classes", 2);
        cfg.source.synthetic.per_class_count = m.get_u("synthetic.per_class", 5000);
        cfg.source.synthetic.feature_dim = m.get_u("synthetic.dim", 50);
        cfg.source.synthetic.class_center_separation = m.get_d("synthetic.separation", 4.0);
        cfg.source.synthetic.noise_sigma = m.get_d("synthetic.sigma", 1.0);
    } else if (dk == "csv" || dk == "dmbin") {
        cfg.source.kind = dk == "csv" ? DatasetSource::Kind::Csv : DatasetSource::Kind::Dmbin;
        cfg.source.path = m.require("dataset.path");
        cfg.source.csv_classes = m.get_u("dataset.classes", 2);
    } else {
        throw std::invalid_argument("config: unknown dataset.kind '" + dk + "'");
    }

    std::string ck = m.get("corruption.kind", "none");
    if (ck == "none") {
        cfg.corruption.kind = CorruptionKind::None;
    } else if (ck == "symmetric") {
        cfg.corruption.kind = CorruptionKind::Symmetric;
        cfg.corruption.rate = m.get_d("corruption.rate", 0.0);
    } else if (ck == "asymmetric") {
        cfg.corruption.kind = CorruptionKind::Asymmetric;
        cfg.corruption.rate = m.get_d("corruption.rate", 0.0);
        for (const auto& tok : split_list(m.require("corruption.pairs"))) {
            auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("config: corruption.pairs entries must be 'a:b'");
            cfg.corruption.pairs.emplace_back(std::stoull(tok.substr(0, colon)),
                                              std::stoull(tok.substr(colon + 1)));
        }
    } else {
        throw std::invalid_argument("config: unknown corruption.kind '" + ck + "'");
    }

    if (m.has("imbalance.keep")) {
        std::vector<std::size_t> keep;
        for (const auto& tok : split_list(m.get("imbalance.keep", "")))
            keep.push_back(std::stoull(tok));
        cfg.imbalance_keep = keep;
    }

    cfg.split_fraction = m.get_d("split.fraction", 0.8);

    std::string scheme = m.get("scheme", "cce");
    double q = m.get_d("scheme.q", 0.7);
    if (scheme == "dm") {
        cfg.scheme.kind = SchemeKind::DmEdf;
        cfg.scheme.family = parse_family(m);
    } else if (scheme.size() > 3 && scheme.substr(scheme.size() - 3) == "_dn") {
        cfg.scheme.kind = SchemeKind::LossDN;
        cfg.scheme.loss = parse_loss(scheme.substr(0, scheme.size() - 3), q);
    } else {
        cfg.scheme.kind = SchemeKind::Loss;
        cfg.scheme.loss = parse_loss(scheme, q);
    }

    cfg.hidden_dims.clear();
    for (const auto& tok : split_list(m.get("net.hidden", "8")))
        cfg.hidden_dims.push_back(std::stoull(tok));
    std::string act = m.get("net.activation", "relu");
    if (act == "relu") cfg.activation = Activation::ReLU;
    else if (act == "tanh") cfg.activation = Activation::Tanh;
    else throw std::invalid_argument("config: unknown net.activation '" + act + "'");
    cfg.dropout_rate = m.get_d("net.dropout", 0.0);

    std::string ok = m.get("optimizer.kind", "sgd");
    if (ok == "sgd") cfg.optimizer.kind = OptimKind::SGD;
    else if (ok == "momentum") cfg.optimizer.kind = OptimKind::Momentum;
    else if (ok == "nesterov") cfg.optimizer.kind = OptimKind::Nesterov;
    else if (ok == "adam") cfg.optimizer.kind = OptimKind::Adam;
    else throw std::invalid_argument("config: unknown optimizer.kind '" + ok + "'");
    cfg.optimizer.lr = m.get_d("optimizer.lr", 0.01);
    cfg.optimizer.momentum = m.get_d("optimizer.momentum", 0.9);
    cfg.optimizer.adam_beta1 = m.get_d("optimizer.beta1", 0.9);
    cfg.optimizer.adam_beta2 = m.get_d("optimizer.beta2", 0.999);
    cfg.optimizer.adam_delta = m.get_d("optimizer.delta", 1e-8);
    cfg.optimizer.weight_decay = m.get_d("optimizer.weight_decay", 0.0);
    cfg.optimizer.validate();

    std::string sk = m.get("schedule.kind", "constant");
    if (sk == "constant") cfg.schedule.kind = LrScheduleKind::Constant;
    else if (sk == "step") {
        cfg.schedule.kind = LrScheduleKind::StepDecay;
        for (const auto& tok : split_list(m.get("schedule.milestones", "")))
            cfg.schedule.milestones.push_back(std::stoull(tok));
        cfg.schedule.factor = m.get_d("schedule.factor", 0.1);
    } else if (sk == "inv") {
        cfg.schedule.kind = LrScheduleKind::Inv;
        cfg.schedule.gamma = m.get_d("schedule.gamma", 1e-5);
        cfg.schedule.power = m.get_d("schedule.power", 0.75);
    } else {
        throw std::invalid_argument("config: unknown schedule.kind '" + sk + "'");
    }
    cfg.schedule.validate();

    cfg.batch_size = m.get_u("batch_size", 32);
    cfg.total_iterations = m.get_u("total_iterations", 2000);
    cfg.eval_every = m.get_u("eval_every", 100);
    cfg.seed = m.get_u("seed", 0);
    cfg.source.synthetic.seed = cfg.seed;
    cfg.output_dir = m.get("output_dir", "");

    for (const auto& [k, v] : m.kv)
        if (!m.used.count(k)) throw std::invalid_argument("config: unknown key '" + k + "'");
    if (cfg.batch_size == 0) throw std::invalid_argument("config: batch_size must be > 0");
    if (cfg.eval_every == 0) throw std::invalid_argument("config: eval_every must be > 0");
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

std::string render_run_config(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    switch (cfg.source.kind) {
        case DatasetSource::Kind::Synthetic:
            out << "dataset.kind = synthetic\n"
                << "synthetic.classes = " << cfg.source.synthetic.class_count << "\n"
                << "synthetic.per_class = " << cfg.source.synthetic.per_class_count << "\n"
                << "synthetic.dim = " << cfg.source.synthetic.feature_dim << "\n"
                << "synthetic.separation = " << cfg.source.synthetic.class_center_separation << "\n"
                << "synthetic.sigma = " << cfg.source.synthetic.noise_sigma << "\n";
            break;
        case DatasetSource::Kind::Csv:
            out << "dataset.kind = csv\ndataset.path = " << cfg.source.path
                << "\ndataset.classes = " << cfg.source.csv_classes << "\n";
            break;
        case DatasetSource::Kind::Dmbin:
            out << "dataset.kind = dmbin\ndataset.path = " << cfg.source.path << "\n";
            break;
    }
    switch (cfg.corruption.kind) {
        case CorruptionKind::None: out << "corruption.kind = none\n"; break;
        case CorruptionKind::Symmetric:
            out << "corruption.kind = symmetric\ncorruption.rate = " << cfg.corruption.rate << "\n";
            break;
        case CorruptionKind::Asymmetric: {
            out << "corruption.kind = asymmetric\ncorruption.rate = " << cfg.corruption.rate
                << "\ncorruption.pairs = ";
            for (std::size_t i = 0; i < cfg.corruption.pairs.size(); ++i) {
                if (i) out << ",";
                out << cfg.corruption.pairs[i].first << ":" << cfg.corruption.pairs[i].second;
            }
            out << "\n";
            break;
        }
    }
    if (cfg.imbalance_keep) {
        out << "imbalance.keep = ";
        for (std::size_t i = 0; i < cfg.imbalance_keep->size(); ++i)
            out << (i ? "," : "") << (*cfg.imbalance_keep)[i];
        out << "\n";
    }
    out << "split.fraction = " << cfg.split_fraction << "\n";
    out << "# scheme: " << cfg.scheme.name() << "\n";
    switch (cfg.scheme.kind) {
        case SchemeKind::Loss:
        case SchemeKind::LossDN: {
            std::string base;
            switch (cfg.scheme.loss.tag) {
                case LossTag::CCE: base = "cce"; break;
                case LossTag::MAE: base = "mae"; break;
                case LossTag::MSE: base = "mse"; break;
                case LossTag::GCE: base = "gce"; break;
            }
            out << "scheme = " << base << (cfg.scheme.kind == SchemeKind::LossDN ? "_dn" : "") << "\n";
            if (cfg.scheme.loss.tag == LossTag::GCE)
                out << "scheme.q = " << cfg.scheme.loss.q << "\n";
            break;
        }
        case SchemeKind::DmEdf: {
            out << "scheme = dm\n";
            const EdfFamily& f = cfg.scheme.family;
            switch (f.tag) {
                case EdfTag::Unified:
                    out << "edf.family = unified\nedf.lambda = " << f.lambda
                        << "\nedf.beta = " << f.beta << "\n";
                    break;
                case EdfTag::ED:
                    out << "edf.family = ed\nedf.beta = " << f.beta << "\n";
                    break;
                case EdfTag::ND:
                    out << "edf.family = nd\nedf.psi = " << f.psi << "\nedf.beta = " << f.beta << "\n";
                    break;
                case EdfTag::BD:
                    out << "edf.family = bd\nedf.alpha = " << f.alpha << "\nedf.eta = " << f.eta << "\n";
                    break;
                case EdfTag::FromLoss:
                    out << "edf.family = from_loss\n# edf loss: " << loss_name(f.loss) << "\n";
                    break;
            }
            break;
        }
    }
    out << "net.hidden = ";
    for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i)
        out << (i ? "," : "") << cfg.hidden_dims[i];
    out << "\nnet.activation = " << (cfg.activation == Activation::ReLU ? "relu" : "tanh") << "\n";
    out << "net.dropout = " << cfg.dropout_rate << "\n";
    switch (cfg.optimizer.kind) {
        case OptimKind::SGD: out << "optimizer.kind = sgd\n"; break;
        case OptimKind::Momentum: out << "optimizer.kind = momentum\n"; break;
        case OptimKind::Nesterov: out << "optimizer.kind = nesterov\n"; break;
        case OptimKind::Adam: out << "optimizer.kind = adam\n"; break;
    }
    out << "optimizer.lr = " << cfg.optimizer.lr << "\n"
        << "optimizer.momentum = " << cfg.optimizer.momentum << "\n"
        << "optimizer.beta1 = " << cfg.optimizer.adam_beta1 << "\n"
        << "optimizer.beta2 = " << cfg.optimizer.adam_beta2 << "\n"
        << "optimizer.delta = " << cfg.optimizer.adam_delta << "\n"
        << "optimizer.weight_decay = " << cfg.optimizer.weight_decay << "\n";
    switch (cfg.schedule.kind) {
        case LrScheduleKind::Constant: out << "schedule.kind = constant\n"; break;
        case LrScheduleKind::StepDecay: {
            out << "schedule.kind = step\nschedule.milestones = ";
            for (std::size_t i = 0; i < cfg.schedule.milestones.size(); ++i)
                out << (i ? "," : "") << cfg.schedule.milestones[i];
            out << "\nschedule.factor = " << cfg.schedule.factor << "\n";
            break;
        }
        case LrScheduleKind::Inv:
            out << "schedule.kind = inv\nschedule.gamma = " << cfg.schedule.gamma
                << "\nschedule.power = " << cfg.schedule.power << "\n";
            break;
    }
    out << "batch_size = " << cfg.batch_size << "\n"
        << "total_iterations = " << cfg.total_iterations << "\n"
        << "eval_every = " << cfg.eval_every << "\n"
        << "seed = " << cfg.seed << "\n"
        << "output_dir = " << cfg.output_dir << "\n";
    out << "# note: Adam delta is the denominator stabilizer\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Data preparation and evaluation

PreparedData prepare_data(const RunConfig& cfg) {
    Dataset base;
    switch (cfg.source.kind) {
        case DatasetSource::Kind::Synthetic: base = gen_synthetic(cfg.source.synthetic); break;
        case DatasetSource::Kind::Csv: base = load_csv(cfg.source.path, cfg.source.csv_classes); break;
        case DatasetSource::Kind::Dmbin: base = load_dmbin(cfg.source.path); break;
    }
    if (cfg.imbalance_keep) base = subsample_imbalance(base, *cfg.imbalance_keep, cfg.seed);
    auto [train, val] = split(base, cfg.split_fraction, cfg.seed);
    train = corrupt(train, cfg.corruption, cfg.seed);
    return {std::move(train), std::move(val)};
}

namespace {

double accuracy(const Mlp& net, const Dataset& ds, const std::vector<std::size_t>& labels) {
    Prediction pred = predict(net, ds.features, ds.n);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ds.n; ++i)
        if (pred.labels[i] == labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(ds.n);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

SubsetAccuracy eval_subsets(const Mlp& net, const Dataset& ds) {
    Prediction pred = predict(net, ds.features, ds.n);
    SubsetAccuracy acc;
    std::size_t hit_obs = 0, hit_clean = 0;
    std::size_t n_clean = 0, n_noisy = 0, hit_on_clean = 0, hit_on_noisy = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        if (pred.labels[i] == ds.observed_labels[i]) ++hit_obs;
        if (pred.labels[i] == ds.clean_labels[i]) ++hit_clean;
        if (ds.corrupted_flags[i]) {
            ++n_noisy;
            if (pred.labels[i] == ds.observed_labels[i]) ++hit_on_noisy;
        } else {
            ++n_clean;
            if (pred.labels[i] == ds.observed_labels[i]) ++hit_on_clean;
        }
    }
    acc.vs_observed = static_cast<double>(hit_obs) / static_cast<double>(ds.n);
    acc.vs_clean = static_cast<double>(hit_clean) / static_cast<double>(ds.n);
    if (n_clean) acc.on_clean_subset = static_cast<double>(hit_on_clean) / static_cast<double>(n_clean);
    if (n_noisy) acc.on_noisy_subset = static_cast<double>(hit_on_noisy) / static_cast<double>(n_noisy);
    return acc;
}

PiDynamics track_pi_dynamics(const std::vector<std::vector<double>>& probs,
                             const Dataset& ds, const std::vector<std::size_t>& batch_indices) {
    double sum_clean = 0.0, sum_noisy = 0.0;
    std::size_t n_clean = 0, n_noisy = 0;
    for (std::size_t k = 0; k < batch_indices.size(); ++k) {
        std::size_t i = batch_indices[k];
        double p = probs[k][ds.observed_labels[i]];
        if (ds.corrupted_flags[i]) {
            sum_noisy += p;
            ++n_noisy;
        } else {
            sum_clean += p;
            ++n_clean;
        }
    }
    PiDynamics dyn;
    if (n_clean) dyn.mean_p_clean = sum_clean / static_cast<double>(n_clean);
    if (n_noisy) dyn.mean_p_noisy = sum_noisy / static_cast<double>(n_noisy);
    return dyn;
}

// ---------------------------------------------------------------------------
// Training loop

RunResult run_on(const RunConfig& cfg, const Dataset& train, const Dataset& val) {
    train.validate();
    val.validate();
    if (cfg.batch_size > train.n)
        throw std::invalid_argument("run: batch_size exceeds training set size");

    std::vector<std::size_t> dims;
    dims.push_back(train.dim);
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(train.class_count);

    Mlp net = init_mlp(dims, cfg.activation, cfg.dropout_rate, cfg.seed);
    OptimizerState opt_state = make_optimizer(cfg.optimizer, net.theta.size());

    std::optional<Edf> edf;
    double dn = 1.0;
    if (cfg.scheme.kind == SchemeKind::DmEdf) edf = Edf::make(cfg.scheme.family);
    if (cfg.scheme.kind == SchemeKind::LossDN) dn = dn_scale(cfg.scheme.loss);

    Rng root(cfg.seed);
    Rng shuffle_root = root.stream("shuffle");
    Rng dropout_root = root.stream("dropout");

    std::size_t c = train.class_count;
    std::vector<std::size_t> perm(train.n);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::size_t cursor = train.n;  // forces a shuffle before the first batch
    std::uint64_t epoch = 0;

    RunResult result;
    result.best_val_accuracy = -1.0;
    std::string best_path, final_path;
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        best_path = cfg.output_dir + "/best.dmf";
        final_path = cfg.output_dir + "/final.dmf";
    }

    std::vector<double> feats(cfg.batch_size * train.dim);
    std::vector<double> logit_grads(cfg.batch_size * c);
    std::vector<double> batch_weights(cfg.batch_size);
    std::vector<std::size_t> batch(cfg.batch_size);

    for (std::uint64_t iter = 0; iter < cfg.total_iterations; ++iter) {
        if (cursor + cfg.batch_size > train.n) {
            Rng sh = shuffle_root.stream(epoch++);
            for (std::size_t k = 0; k + 1 < perm.size(); ++k)
                std::swap(perm[k], perm[k + sh.below(perm.size() - k)]);
            cursor = 0;
        }
        for (std::size_t k = 0; k < cfg.batch_size; ++k) {
            batch[k] = perm[cursor + k];
            auto row = train.row(batch[k]);
            std::copy(row.begin(), row.end(), feats.begin() + k * train.dim);
        }
        cursor += cfg.batch_size;

        ForwardCache cache;
        try {
            cache = forward(net, feats, cfg.batch_size, /*train_mode=*/true,
                            dropout_root.stream(iter));
        } catch (const std::invalid_argument&) {
            // Finite but overflowing parameters surface as non-finite logits.
            throw std::runtime_error("run: diverged (non-finite logits) at iteration " +
                                     std::to_string(iter));
        }

        for (std::size_t k = 0; k < cfg.batch_size; ++k) {
            std::size_t y = train.observed_labels[batch[k]];
            const auto& p = cache.probs[k];
            std::vector<double> g;
            switch (cfg.scheme.kind) {
                case SchemeKind::Loss:
                    g = grad_logits(cfg.scheme.loss, p, y);
                    batch_weights[k] = weight_magnitude(cfg.scheme.loss, p[y]);
                    break;
                case SchemeKind::LossDN:
                    g = grad_logits(cfg.scheme.loss, p, y);
                    for (double& v : g) v *= dn;
                    batch_weights[k] = dn * weight_magnitude(cfg.scheme.loss, p[y]);
                    break;
                case SchemeKind::DmEdf:
                    g = dm_grad_logits(p, y, *edf);
                    batch_weights[k] = edf->normalized(p[y]);
                    break;
            }
            std::copy(g.begin(), g.end(), logit_grads.begin() + k * c);
        }

        std::vector<double> grads = backward(net, cache, logit_grads);
        double lr = lr_at(cfg.schedule, cfg.optimizer.lr, iter);
        step(cfg.optimizer, opt_state, net.theta, grads, lr);

        for (double v : net.theta)
            if (!std::isfinite(v))
                throw std::runtime_error("run: non-finite parameter after iteration " +
                                         std::to_string(iter));

        std::uint64_t done = iter + 1;
        if (done % cfg.eval_every == 0 || done == cfg.total_iterations) {
            MetricsRow row;
            row.iteration = done;
            row.train_accuracy_corrupted = accuracy(net, train, train.observed_labels);
            row.train_accuracy_intact = accuracy(net, train, train.clean_labels);
            row.val_accuracy = accuracy(net, val, val.observed_labels);
            PiDynamics dyn = track_pi_dynamics(cache.probs, train, batch);
            row.mean_p_clean = dyn.mean_p_clean.value_or(-1.0);
            row.mean_p_noisy = dyn.mean_p_noisy.value_or(-1.0);
            double mw = 0.0;
            for (double w : batch_weights) mw += w;
            row.mean_weight = mw / static_cast<double>(cfg.batch_size);
            row.emphasis_variance_batch = emphasis_variance(batch_weights);
            row.learning_rate = lr;
            result.metrics.push_back(row);

            if (row.val_accuracy > result.best_val_accuracy) {
                result.best_val_accuracy = row.val_accuracy;
                result.best_iteration = done;
                if (!best_path.empty()) save_checkpoint(net, best_path);
            }
        }
    }

    result.final_val_accuracy = result.metrics.empty() ? 0.0 : result.metrics.back().val_accuracy;
    result.final_net = net;
    result.checkpoint_path = best_path;
    if (!cfg.output_dir.empty()) {
        save_checkpoint(net, final_path);
        write_metrics_csv(result.metrics, cfg.output_dir + "/metrics.csv");
        std::ofstream meta(cfg.output_dir + "/run_meta.txt");
        meta << render_run_config(cfg);
    }
    return result;
}

RunResult run_training(const RunConfig& cfg) {
    PreparedData data = prepare_data(cfg);
    return run_on(cfg, data.train, data.val);
}

RunResult label_correct_and_retrain(const RunConfig& cfg, const Mlp& trained_net,
                                    const Dataset& train, const Dataset& val) {
    Prediction pred = predict(trained_net, train.features, train.n);
    Dataset relabeled = train;
    for (std::size_t i = 0; i < relabeled.n; ++i) {
        relabeled.observed_labels[i] = pred.labels[i];
        relabeled.corrupted_flags[i] = relabeled.observed_labels[i] != relabeled.clean_labels[i];
    }
    RunConfig retrain_cfg = cfg;
    if (!retrain_cfg.output_dir.empty()) retrain_cfg.output_dir += "/label_corrected";
    return run_on(retrain_cfg, relabeled, val);
}

// ---------------------------------------------------------------------------
// Sweeps and exports

std::vector<SweepRow> sweep(const std::vector<RunConfig>& configs) {
    std::vector<SweepRow> rows;
    for (const RunConfig& cfg : configs) {
        SweepRow row;
        if (cfg.scheme.kind == SchemeKind::DmEdf) {
            row.lambda = cfg.scheme.family.lambda;
            row.beta = cfg.scheme.family.beta;
            row.mode = emphasis_mode_numeric(cfg.scheme.family, 10001);
        }
        try {
            RunResult r = run_training(cfg);
            row.best = r.best_val_accuracy;
            row.final_acc = r.final_val_accuracy;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.lambda != b.lambda) return a.lambda < b.lambda;
        return a.beta < b.beta;
    });
    return rows;
}

std::string render_sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "lambda,beta,mode,best,final,status\n";
    for (const SweepRow& r : rows) {
        out += fmt(r.lambda) + "," + fmt(r.beta) + "," + fmt(r.mode) + ",";
        if (r.failed) {
            out += ",,failed: " + r.error + "\n";
        } else {
            out += fmt(r.best) + "," + fmt(r.final_acc) + ",ok\n";
        }
    }
    return out;
}

void export_edf_curve(const EdfFamily& family, int n_points, const std::string& path) {
    if (n_points < 2) throw std::invalid_argument("edf-curve: n_points must be >= 2");
    Edf edf = Edf::make(family);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("edf-curve: cannot open " + path);
    out << "p,raw_weight,normalized_weight\n";
    for (int i = 0; i < n_points; ++i) {
        double p = static_cast<double>(i) / static_cast<double>(n_points - 1);
        out << fmt(p) << ',' << fmt(edf_raw(family, p)) << ',' << fmt(edf.normalized(p)) << "\n";
    }
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot open " + path);
    out << "iter,acc_train_corrupted,acc_train_intact,acc_val,mean_p_clean,mean_p_noisy,"
           "mean_weight,emphasis_variance,lr\n";
    for (const MetricsRow& r : rows) {
        out << r.iteration << ',' << fmt(r.train_accuracy_corrupted) << ','
            << fmt(r.train_accuracy_intact) << ',' << fmt(r.val_accuracy) << ','
            << (r.mean_p_clean < 0 ? std::string() : fmt(r.mean_p_clean)) << ','
            << (r.mean_p_noisy < 0 ? std::string() : fmt(r.mean_p_noisy)) << ','
            << fmt(r.mean_weight) << ',' << fmt(r.emphasis_variance_batch) << ','
            << fmt(r.learning_rate) << "\n";
        out.flush();
    }
}

}  // namespace dm
