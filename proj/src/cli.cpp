#include "grae/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "grae/datasets.hpp"
#include "grae/error.hpp"
#include "grae/experiments.hpp"
#include "grae/trainer.hpp"

namespace grae {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* kind) {
    throw Error(ErrorCode::ConfigError, "key '" + key + "': expected " + kind + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a number");
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return out;
}

template <class F>
auto config_guard(const std::string& key, const std::string& value, F&& f) {
    try {
        return f(value);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(ErrorCode::ConfigError, "key '" + key + "': " + e.what());
    } catch (const std::invalid_argument& e) {
        throw Error(ErrorCode::ConfigError, "key '" + key + "': " + e.what());
    }
}

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& rel, const std::string& content) {
        const fs::path p = dir_ / rel;
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        std::ofstream out(p, std::ios::binary);
        out << content;
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
        files_.push_back(rel);
    }
    void record(const std::string& rel) { files_.push_back(rel); }
    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

template <class F>
std::string render(F&& f) {
    std::ostringstream out;
    f(out);
    return out.str();
}

std::string matrix_csv(const Matrix& m) {
    return render([&](std::ostream& o) { write_csv(o, m); });
}

SyntheticSpec synthetic_spec(const ConfigMap& c) {
    SyntheticSpec s;
    s.column_norms = c.get_double_list("data.column_norms", s.column_norms);
    s.latent_dim = s.column_norms.size();
    s.n = c.get_uint("data.n", s.n);
    s.noise_std = c.get_double("data.noise_std", s.noise_std);
    s.orthogonal_columns = c.get_bool("data.orthogonal_w", s.orthogonal_columns);
    const std::string nu = c.get_string("data.nu", "tanh");
    s.nu = config_guard("data.nu", nu, [](const std::string& v) { return parse_activation(v); });
    return s;
}

std::string preset(const ConfigMap& c) {
    const std::string p = c.get_string("data.preset", "synthetic");
    if (p != "synthetic" && p != "mnist" && p != "csv") bad_value("data.preset", p, "synthetic, mnist or csv");
    return p;
}

Matrix read_matrix_file(const std::string& key, const std::string& path) {
    if (path.empty()) throw Error(ErrorCode::ConfigError, "key '" + key + "' is required");
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read_dataset_csv(in);
}

Dataset training_data(const ConfigMap& c) {
    const std::string p = preset(c);
    const std::uint64_t seed = c.get_uint("data.seed", 0);
    if (p == "synthetic") return gen_synthetic(synthetic_spec(c), seed);
    if (p == "mnist") {
        const IdxArray images = load_idx(c.get_string("data.idx_images", "data/mnist5k-images.idx3-ubyte"));
        return preprocess(images, c.get_uint("data.side", 8), c.get_uint("data.m", 2000), seed);
    }
    Dataset d;
    d.x = read_matrix_file("data.path", c.get_string("data.path", ""));
    d.provenance = "csv " + c.get_string("data.path", "");
    return d;
}

Matrix test_data(const ConfigMap& c) {
    const std::string p = preset(c);
    const std::uint64_t seed = c.get_uint("data.seed", 0);
    const std::size_t size = c.get_uint("eval.test_size", 500);
    if (p == "synthetic") {
        SyntheticSpec s = synthetic_spec(c);
        s.n = size;
        if (size == 0) throw Error(ErrorCode::EmptySelection, "empty test split");
        return gen_synthetic(s, derive_seed(seed, 1)).x;
    }
    if (p == "mnist") {
        const IdxArray images = load_idx(c.get_string("data.idx_images", "data/mnist5k-images.idx3-ubyte"));
        return preprocess(images, c.get_uint("data.side", 8), size, seed, c.get_uint("data.m", 2000)).x;
    }
    Matrix m = read_matrix_file("data.test_path", c.get_string("data.test_path", ""));
    if (m.rows() == 0) throw Error(ErrorCode::EmptySelection, "empty test split");
    return m;
}

std::vector<std::size_t> hidden_sizes(const ConfigMap& c, const std::string& key) {
    return c.get_uint_list(key, {});
}

TrainConfig train_config(const ConfigMap& c) {
    TrainConfig t;
    const std::string objective = c.get_string("objective", "beta_vae");
    t.objective = config_guard("objective", objective, [](const std::string& v) { return parse_objective(v); });
    t.beta = c.get_double("beta", 1.0);
    t.iterations = c.get_uint("iterations", 1000);
    t.batch_size = c.get_uint("batch_size", 64);
    t.seed = c.get_uint("seed", 0);
    const std::string structure = c.get_string("posterior.structure", "diagonal");
    t.structure =
        config_guard("posterior.structure", structure, [](const std::string& v) { return CovarianceStructure::parse(v); });
    t.amortized_covariance = c.get_bool("posterior.amortized_covariance", false);
    t.rotation_randomization = c.get_bool("posterior.rotation_randomization", false);
    const std::string optimizer = c.get_string("optimizer", "adam");
    t.optimizer = config_guard("optimizer", optimizer, [](const std::string& v) { return parse_optimizer(v); });
    t.lr = c.get_double("lr", 1e-3);
    const auto schedule = c.get_uint_list("schedule.n", {0});
    if (schedule.size() != 1) throw Error(ErrorCode::ConfigError, "key 'schedule.n': train takes a single value");
    t.schedule_period = schedule[0];
    t.latent_dim = c.get_uint("latent_dim", 2);
    t.encoder_hidden = hidden_sizes(c, "encoder.hidden");
    t.decoder_hidden = hidden_sizes(c, "decoder.hidden");
    const std::string act = c.get_string("activation", "elu");
    t.hidden_activation = config_guard("activation", act, [](const std::string& v) { return parse_activation(v); });
    const std::string out = c.get_string("decoder.output", "identity");
    t.decoder_output = config_guard("decoder.output", out, [](const std::string& v) { return parse_activation(v); });
    t.k = c.get_uint("k", 1);
    const std::string obs = c.get_string("obs", "gaussian_unit");
    t.obs = config_guard("obs", obs, [](const std::string& v) { return parse_observation(v); });
    t.log_every = c.get_uint("log_every", 1);
    t.checkpoint_every = c.get_uint("checkpoint_every", 0);
    config_guard("config", "", [&](const std::string&) {
        t.validate();
        return 0;
    });
    return t;
}

fs::path out_dir(const ConfigMap& c) { return c.get_string("out_dir", "out"); }

std::string checkpoint_name(std::size_t iteration) {
    std::string digits = std::to_string(iteration);
    if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
    return "checkpoints/ckpt_" + digits + ".json";
}

std::vector<fs::path> list_checkpoints(const fs::path& dir) {
    std::vector<fs::path> out;
    std::error_code ec;
    if (fs::is_directory(dir, ec)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const fs::path& p = entry.path();
            if (p.extension() == ".json" && p.filename().string().rfind("ckpt_", 0) == 0) out.push_back(p);
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error(ErrorCode::IoError, "no checkpoints in " + dir.string());
    return out;
}

fs::path checkpoint_dir(const ConfigMap& c) {
    return c.get_string("checkpoint_dir", (out_dir(c) / "checkpoints").string());
}

RunManifest finish(const std::string& command, const ConfigMap& c, const Outputs& outputs,
                   std::chrono::steady_clock::time_point start) {
    RunManifest m;
    m.command = command;
    m.config = c.entries();
    m.seed = c.get_uint("seed", 0);
    m.out_dir = outputs.dir();
    m.files = outputs.files();
    m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(m);
    return m;
}

std::string arm_file(bool amortized, const CovarianceStructure& s) {
    std::string name = s.to_string();
    name.erase(std::remove(name.begin(), name.end(), ':'), name.end());
    return std::string("sweep_") + (amortized ? "amortized_" : "unamortized_") + name + ".csv";
}

}  // namespace

const std::vector<std::string>& ConfigMap::known_keys() {
    static const std::vector<std::string> keys{
        "seed", "out_dir", "objective", "beta", "posterior.structure", "posterior.amortized_covariance",
        "posterior.rotation_randomization", "latent_dim", "iterations", "batch_size", "optimizer", "lr",
        "schedule.n", "encoder.hidden", "decoder.hidden", "activation", "decoder.output", "obs", "k",
        "log_every", "checkpoint_every", "data.preset", "data.seed", "data.n", "data.nu", "data.noise_std",
        "data.column_norms", "data.orthogonal_w", "data.idx_images", "data.side", "data.m", "data.path",
        "data.test_path", "eval.mc_samples", "eval.test_size", "eval.points", "eval.block", "trials.per_n",
        "sweep.arms", "sweep.threads", "checkpoint_dir", "checkpoint"};
    return keys;
}

ConfigMap ConfigMap::parse(std::string_view text) {
    ConfigMap c;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
        }
        c.set(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    }
    return c;
}

ConfigMap ConfigMap::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
    }
    entries_[key] = value;
}

void ConfigMap::apply(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw Error(ErrorCode::ConfigError, "expected key=value, got '" + std::string(assignment) + "'");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool ConfigMap::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_double(key, it->second);
}

std::uint64_t ConfigMap::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_uint(key, it->second);
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::vector<std::size_t> ConfigMap::get_uint_list(const std::string& key,
                                                  const std::vector<std::size_t>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_uint(key, item));
    return out;
}

std::vector<double> ConfigMap::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
    return out;
}

std::vector<std::string> ConfigMap::get_string_list(const std::string& key,
                                                    const std::vector<std::string>& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : split_list(it->second);
}

ConfigMap resolve_config(const std::optional<fs::path>& file, const std::vector<std::string>& assignments,
                         const char* env_seed) {
    ConfigMap c = file ? ConfigMap::load(*file) : ConfigMap{};
    if (env_seed != nullptr && *env_seed != '\0') {
        c.set("seed", env_seed);
        c.get_uint("seed", 0);
    }
    for (const auto& a : assignments) c.apply(a);
    return c;
}

void write_manifest(const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["seed"] = m.seed;
    j["out_dir"] = m.out_dir.string();
    j["files"] = m.files;
    j["duration_seconds"] = m.duration_seconds;
    fs::create_directories(m.out_dir);
    const fs::path target = m.out_dir / "manifest.json";
    const fs::path tmp = m.out_dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp);
        out << j.dump(1) << '\n';
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

RunManifest cmd_gen_data(const ConfigMap& c) {
    const auto start = std::chrono::steady_clock::now();
    const Dataset data = training_data(c);
    const std::string data_csv = render([&](std::ostream& o) { write_dataset_csv(o, data.x); });
    Outputs out(out_dir(c));
    out.write("data.csv", data_csv);
    if (data.z_true) out.write("latents.csv", render([&](std::ostream& o) { write_dataset_csv(o, *data.z_true); }));
    if (data.w) out.write("w.csv", matrix_csv(*data.w));
    return finish("gen-data", c, out, start);
}

RunManifest cmd_train(const ConfigMap& c) {
    const auto start = std::chrono::steady_clock::now();
    const TrainConfig config = train_config(c);
    const Dataset data = training_data(c);
    Outputs out(out_dir(c));
    fs::create_directories(out.dir() / "checkpoints");
    auto save = [&](std::size_t iteration, const VaeModel& model, const Rng& rng, const std::string& rel) {
        Checkpoint ck;
        ck.config = config;
        ck.model = model;
        ck.rng_state = rng_state_string(rng);
        ck.iteration = iteration;
        save_checkpoint(out.dir() / rel, ck);
        out.record(rel);
    };
    Rng rng(config.seed);
    try {
        const TrainResult result = train(config, data, rng, [&](std::size_t it, const VaeModel& m, const Rng& r) {
            save(it, m, r, checkpoint_name(it));
        });
        out.write("trace.csv", render([&](std::ostream& o) { result.trace.write_csv(o); }));
    } catch (const TrainingAborted& e) {
        save(e.iteration(), e.last_good(), rng, "checkpoints/aborted.json");
        out.write("trace.csv", render([&](std::ostream& o) { e.trace().write_csv(o); }));
        throw;
    }
    return finish("train", c, out, start);
}

RunManifest cmd_uniqueness_sweep(const ConfigMap& c) {
    const auto start = std::chrono::steady_clock::now();
    SweepConfig base;
    base.data = synthetic_spec(c);
    if (base.data.latent_dim != 2) throw Error(ErrorCode::ConfigError, "uniqueness sweeps need a 2D latent space");
    base.beta = c.get_double("beta", 0.2);
    base.schedule_n = c.get_uint_list("schedule.n", base.schedule_n);
    base.trials_per_n = c.get_uint("trials.per_n", base.trials_per_n);
    base.seed = c.get_uint("seed", 0);
    base.elbo_samples = c.get_uint("eval.mc_samples", base.elbo_samples);
    const std::size_t threads = c.get_uint("sweep.threads", 0);
    const auto arms = c.get_string_list(
        "sweep.arms", {"amortized:diagonal", "amortized:full", "unamortized:diagonal", "unamortized:full"});
    std::vector<SweepConfig> configs;
    for (const auto& arm : arms) {
        const auto colon = arm.find(':');
        const std::string mode = arm.substr(0, colon);
        if (colon == std::string::npos || (mode != "amortized" && mode != "unamortized")) {
            bad_value("sweep.arms", arm, "<amortized|unamortized>:<structure>");
        }
        SweepConfig sc = base;
        sc.amortized = mode == "amortized";
        sc.structure = config_guard("sweep.arms", arm.substr(colon + 1),
                                    [](const std::string& v) { return CovarianceStructure::parse(v); });
        configs.push_back(sc);
    }
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& sc : configs) {
        const auto rows = run_uniqueness_sweep(sc, threads);
        for (const auto& r : rows) {
            if (!r.ok) std::cerr << "trial " << r.trial << " failed: " << r.error << '\n';
        }
        files.emplace_back(arm_file(sc.amortized, sc.structure), render([&](std::ostream& o) { write_sweep_csv(o, rows); }));
    }
    Outputs out(out_dir(c));
    for (const auto& [name, content] : files) out.write(name, content);
    return finish("uniqueness-sweep", c, out, start);
}

RunManifest cmd_compare_objectives(const ConfigMap& c) {
    const auto start = std::chrono::steady_clock::now();
    const auto paths = list_checkpoints(checkpoint_dir(c));
    const Matrix test = test_data(c);
    const std::size_t mc = c.get_uint("eval.mc_samples", 64);
    const std::uint64_t seed = c.get_uint("seed", 0);
    std::vector<ObjectiveRow> rows;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const Checkpoint ck = load_checkpoint(paths[i]);
        if (!ck.model.amortized) throw Error(ErrorCode::ConfigError, "objective comparison needs an amortized model");
        if (ck.model.decoder.in_dim() != ck.model.latent_dim || test.cols() != ck.model.decoder.out_dim()) {
            throw Error(ErrorCode::DimensionMismatch, "test data does not match " + paths[i].string());
        }
        ObjectiveRow row = evaluate_objectives(ck.model, test, ck.config.beta, mc, derive_seed(seed, i));
        row.checkpoint = paths[i].stem().string();
        rows.push_back(row);
    }
    Outputs out(out_dir(c));
    out.write("objectives.csv", render([&](std::ostream& o) { write_objectives_csv(o, rows); }));
    return finish("compare-objectives", c, out, start);
}

RunManifest cmd_jacobian_structure(const ConfigMap& c) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path path = c.has("checkpoint") ? fs::path(c.get_string("checkpoint", ""))
                                              : list_checkpoints(checkpoint_dir(c)).back();
    const Checkpoint ck = load_checkpoint(path);
    if (!ck.model.amortized) throw Error(ErrorCode::ConfigError, "jacobian structure needs an amortized model");
    Matrix test = test_data(c);
    const std::size_t points = std::min<std::size_t>(c.get_uint("eval.points", 50), test.rows());
    if (points == 0) throw Error(ErrorCode::EmptySelection, "no test points");
    if (test.cols() != ck.model.decoder.out_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "test data does not match " + path.string());
    }
    Matrix subset(points, test.cols());
    for (std::size_t i = 0; i < points; ++i) std::copy(test.row(i).begin(), test.row(i).end(), subset.row(i).begin());
    const std::size_t d = ck.model.latent_dim;
    const std::size_t block = c.get_uint("eval.block", ck.model.structure.block_size(d));
    const auto rows = jacobian_structure(ck.model, subset, ck.config.beta, block);
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("summary.csv", render([&](std::ostream& o) { write_structure_csv(o, rows); }));
    for (const auto& r : rows) {
        files.emplace_back("matrices/sigma_inv_" + std::to_string(r.point) + ".csv", matrix_csv(r.sigma_inv));
        files.emplace_back("matrices/jtj_" + std::to_string(r.point) + ".csv", matrix_csv(r.jtj));
    }
    Outputs out(out_dir(c));
    for (const auto& [name, content] : files) out.write(name, content);
    return finish("jacobian-structure", c, out, start);
}

int exit_code_for(const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    if (err == nullptr) return 3;
    switch (err->code()) {
        case ErrorCode::ConfigError:
        case ErrorCode::IoError:
        case ErrorCode::BadMagic:
        case ErrorCode::TruncatedFile:
        case ErrorCode::EmptySelection:
        case ErrorCode::VersionMismatch:
        case ErrorCode::CorruptDocument:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::LengthMismatch:
            return 2;
        default:
            return 3;
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Beta-VAE / GRAE experiment runner", "grae_lab"};
    app.require_subcommand(1);
    std::optional<std::string> config_file;
    std::vector<std::string> assignments;
    std::optional<std::string> seed, out, beta, iterations, objective;

    using Command = RunManifest (*)(const ConfigMap&);
    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"gen-data", "Generate or preprocess a dataset", cmd_gen_data},
        {"train", "Train a model and write checkpoints", cmd_train},
        {"uniqueness-sweep", "Rotation-angle sweep on 2D synthetic data", cmd_uniqueness_sweep},
        {"compare-objectives", "Evaluate objectives over checkpoints", cmd_compare_objectives},
        {"jacobian-structure", "Export precision and Jacobian metric matrices", cmd_jacobian_structure},
    };
    Command selected = nullptr;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_file, "key = value config file");
        sub->add_option("-s,--set", assignments, "key=value override (repeatable)");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("-o,--out-dir", out, "output directory");
        sub->add_option("--beta", beta, "beta");
        sub->add_option("--iterations", iterations, "training iterations");
        sub->add_option("--objective", objective, "beta_vae | grae_approx | unamortized_vi");
        sub->callback([&selected, f = fn] { selected = f; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (seed) assignments.push_back("seed=" + *seed);
        if (out) assignments.push_back("out_dir=" + *out);
        if (beta) assignments.push_back("beta=" + *beta);
        if (iterations) assignments.push_back("iterations=" + *iterations);
        if (objective) assignments.push_back("objective=" + *objective);
        const ConfigMap config = resolve_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt,
                                                assignments, std::getenv("GRAE_LAB_SEED"));
        const RunManifest m = selected(config);
        std::cout << m.command << ": wrote " << m.files.size() << " files to " << m.out_dir.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace grae
