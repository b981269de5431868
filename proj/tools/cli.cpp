#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "check.hpp"
#include "xfmr/errors.hpp"
#include "xfmr/eval.hpp"
#include "xfmr/surrogate.hpp"

namespace xfmr::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
public:
    using Error::Error;
};

class CheckFailed : public Error {
public:
    using Error::Error;
};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_number(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError(what + ": not a number: '" + text + "'");
    }
}

void set_constant(SurrogateConstants& c, const std::string& name, double v) {
    static const std::map<std::string, double SurrogateConstants::*> fields = {
        {"mu", &SurrogateConstants::mu},       {"alpha_f", &SurrogateConstants::alpha_f},
        {"k_max", &SurrogateConstants::k_max}, {"gamma_k", &SurrogateConstants::gamma_k},
        {"r_sh", &SurrogateConstants::r_sh},   {"f_ref", &SurrogateConstants::f_ref},
        {"c_a", &SurrogateConstants::c_a},     {"c_f", &SurrogateConstants::c_f},
        {"x_ref", &SurrogateConstants::x_ref},
    };
    const auto it = fields.find(name);
    if (it == fields.end()) throw UsageError("config: unknown surrogate constant '" + name + "'");
    c.*(it->second) = v;
}

/// key=value file. `surrogate.<name>` keys override forward-model constants;
/// every other key becomes a `--key=value` flag placed before the command-line
/// flags, so explicit flags win.
std::vector<std::string> read_config(const fs::path& path, SurrogateConstants& constants) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#' || text.front() == ';') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(std::string_view(text).substr(0, eq));
        auto value = trim(std::string_view(text).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.starts_with("surrogate.")) {
            set_constant(constants, key.substr(10), parse_number(value, key));
        } else {
            tokens.push_back("--" + key + "=" + value);
        }
    }
    return tokens;
}

std::vector<std::size_t> parse_sizes(const std::vector<std::string>& items) {
    std::vector<std::size_t> out;
    for (const auto& s : items) {
        const double v = parse_number(s, "size");
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
            throw UsageError("size must be a non-negative integer: '" + s + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

nn::DecayMode parse_decay_mode(const std::string& s) {
    if (s == "decoupled") return nn::DecayMode::decoupled;
    if (s == "coupled") return nn::DecayMode::coupled;
    throw UsageError("decay mode must be decoupled or coupled");
}

nn::ProjectionMode parse_projection(const std::string& s) {
    if (s == "learned") return nn::ProjectionMode::learned;
    if (s == "fixed") return nn::ProjectionMode::fixed;
    throw UsageError("projection must be learned or fixed");
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw IoError("no such file: " + p.string());
}

void require_parent(const fs::path& p) {
    const auto parent = p.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) throw IoError("no such directory: " + parent.string());
}

// ---------------------------------------------------------------------------
// Shared option groups

struct TrainingFlags {
    std::string arch = "N7";
    std::size_t width = 2048;
    std::string loss = "sdmse";
    std::size_t epochs = 200;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    std::string decay_mode = "decoupled";
    std::size_t batch = 16;
    std::string projection = "learned";

    void add_hyper(CLI::App* app) {
        app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
        app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        app->add_option("--beta1", beta1, "Adam first-moment decay")->capture_default_str();
        app->add_option("--beta2", beta2, "Adam second-moment decay")->capture_default_str();
        app->add_option("--eps", eps, "Adam epsilon")->capture_default_str();
        app->add_option("--weight-decay", weight_decay, "Weight decay w")->capture_default_str();
        app->add_option("--decay-mode", decay_mode, "decoupled | coupled")->capture_default_str();
        app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
        app->add_option("--projection", projection, "Shortcut projection: learned | fixed")->capture_default_str();
        app->add_option("--width", width, "Hidden layer width")->capture_default_str();
    }

    nn::HyperParams hyper(std::uint64_t seed) const {
        nn::HyperParams hp;
        hp.learning_rate = lr;
        hp.beta1 = beta1;
        hp.beta2 = beta2;
        hp.epsilon = eps;
        hp.weight_decay = weight_decay;
        hp.decay_mode = parse_decay_mode(decay_mode);
        hp.batch_size = batch;
        hp.epochs = epochs;
        hp.seed = seed;
        hp.validate();
        return hp;
    }
};

struct Common {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string config;
    SurrogateConstants constants{};

    void add(CLI::App* app, bool seed_required) {
        auto* s = app->add_option("--seed", seed, "Master seed for every random draw");
        if (seed_required) s->required();
        app->add_option("--threads", threads, "Worker thread cap")->capture_default_str();
        app->add_option("--config", config, "key=value file; explicit flags override it");
    }
};

// ---------------------------------------------------------------------------
// Subcommands

struct GenData {
    Common common;
    std::size_t n = 0;
    std::string out;
    double noise = 0.0;

    void add(CLI::App* app) {
        common.add(app, true);
        app->add_option("--n", n, "Number of samples")->required();
        app->add_option("--out", out, "Output CSV")->required();
        app->add_option("--noise", noise, "Multiplicative Gaussian noise sigma on circuit parameters")
            ->capture_default_str();
    }

    int run(std::ostream& os) {
        require_parent(out);
        DatasetOptions opt;
        opt.constants = common.constants;
        opt.noise_sigma = noise;
        opt.threads = common.threads;
        const auto ds = generate_dataset(n, common.seed, opt);
        data::save_csv(ds, out);
        os << "wrote " << ds.size() << " samples to " << out << '\n';
        return kOk;
    }
};

struct Train {
    Common common;
    TrainingFlags flags;
    std::string data_path;
    std::string out;
    std::string log;
    std::size_t train_size = 2400;
    std::size_t test_size = 1200;
    bool exclude_feed = false;

    void add(CLI::App* app) {
        common.add(app, true);
        app->add_option("--data", data_path, "Dataset CSV")->required();
        app->add_option("--out", out, "Model file to write")->required();
        app->add_option("--log", log, "Training log CSV (default: <out>.log.csv)");
        app->add_option("--arch", flags.arch, "FN2..FN7, N5, N6, N7")->capture_default_str();
        app->add_option("--loss", flags.loss, "smse | sdmse")->capture_default_str();
        app->add_option("--train-size", train_size, "Training samples")->capture_default_str();
        app->add_option("--test-size", test_size, "Held-out samples drawn before the training set")
            ->capture_default_str();
        app->add_flag("--exclude-feed-length", exclude_feed, "Drop the feed-length target");
        flags.add_hyper(app);
    }

    int run(std::ostream& os) {
        require_file(data_path);
        require_parent(out);
        if (log.empty()) log = out + ".log.csv";
        require_parent(log);
        const auto hp = flags.hyper(derive_seed(common.seed, "train"));
        const auto kind = nn::parse_loss_kind(flags.loss);

        auto ds = data::load_csv(data_path);
        if (exclude_feed) ds = eval::exclude_feed_length(ds);
        auto arch = nn::make_preset(flags.arch, flags.width, data::kInputDim, ds.target_dim());
        arch.projection = parse_projection(flags.projection);
        const auto parts = data::split(ds, test_size, train_size, derive_seed(common.seed, "split"));

        const auto result = nn::train(arch, parts.train, hp, kind);
        nn::save_model(result.network, out);

        std::ofstream log_out(log, std::ios::binary);
        if (!log_out) throw IoError("cannot open " + log + " for writing");
        log_out << "epoch,train_loss\n";
        for (const auto& e : result.log) log_out << e.epoch << ',' << data::format_double(e.loss) << '\n';

        os << "arch " << arch.describe() << ", " << result.network.model.parameter_count() << " parameters\n";
        if (!result.log.empty()) {
            os << "final training " << nn::to_string(kind) << ' ' << data::format_double(result.log.back().loss)
               << '\n';
        }
        os << "wrote " << out << " and " << log << '\n';
        return kOk;
    }
};

struct Eval {
    Common common;
    std::string data_path;
    std::string model_path;
    std::string out;
    std::string name = "model";
    std::string loss = "sdmse";
    std::size_t train_size = 0;
    std::size_t test_size = 1200;

    void add(CLI::App* app) {
        common.add(app, true);
        app->add_option("--data", data_path, "Dataset CSV (same one used for training)")->required();
        app->add_option("--model", model_path, "Model file")->required();
        app->add_option("--out", out, "Report CSV")->required();
        app->add_option("--name", name, "Model label for the report")->capture_default_str();
        app->add_option("--loss", loss, "Training-loss label for the report")->capture_default_str();
        app->add_option("--train-size", train_size, "Training-size label for the report")->capture_default_str();
        app->add_option("--test-size", test_size, "Held-out samples (must match training)")->capture_default_str();
    }

    int run(std::ostream& os) {
        require_file(data_path);
        require_file(model_path);
        require_parent(out);
        const auto net = nn::load_model(model_path);
        auto ds = data::load_csv(data_path);
        if (net.model.architecture().output_dim == 5 && ds.has_feed_length()) ds = eval::exclude_feed_length(ds);
        const auto parts = data::split(ds, test_size, 0, derive_seed(common.seed, "split"));
        const auto y_hat = net.predict(parts.test.x);
        const std::vector<eval::ExperimentReport> reports = {
            eval::evaluate_predictions(name, nn::parse_loss_kind(loss), train_size, y_hat, parts.test.y)};
        eval::write_report_csv(reports, out);
        eval::print_report_table(reports, os);
        return kOk;
    }
};

struct Sweep {
    Common common;
    TrainingFlags flags;
    std::string data_path;
    std::string out;
    std::vector<std::string> models = {"LR", "GB", "FN7", "N7"};
    std::vector<std::string> sizes = {"600", "1200", "2400", "4800"};
    std::vector<std::string> losses = {"smse", "sdmse"};
    std::size_t repeats = 5;
    std::size_t test_size = 1200;
    std::size_t gb_rounds = 200;
    std::size_t gb_depth = 3;
    double gb_shrinkage = 0.1;
    bool exclude_feed = false;
    bool timing = false;
    bool quiet = false;

    void add(CLI::App* app) {
        common.add(app, true);
        app->add_option("--data", data_path, "Dataset CSV")->required();
        app->add_option("--out", out, "Report CSV")->required();
        app->add_option("--models", models, "Comma-separated: LR, GB, FN2..FN7, N5..N7")
            ->delimiter(',')
            ->capture_default_str();
        app->add_option("--sizes", sizes, "Comma-separated training sizes")->delimiter(',')->capture_default_str();
        app->add_option("--losses", losses, "Comma-separated: smse, sdmse")->delimiter(',')->capture_default_str();
        app->add_option("--repeats", repeats, "Independent repeats per configuration")->capture_default_str();
        app->add_option("--test-size", test_size, "Shared test-set size")->capture_default_str();
        app->add_option("--gb-rounds", gb_rounds, "Boosting rounds")->capture_default_str();
        app->add_option("--gb-depth", gb_depth, "Boosting tree depth")->capture_default_str();
        app->add_option("--gb-shrinkage", gb_shrinkage, "Boosting shrinkage")->capture_default_str();
        app->add_flag("--exclude-feed-length", exclude_feed, "Drop the feed-length target");
        app->add_flag("--timing", timing, "Add a wall-clock column to the CSV (not reproducible)");
        app->add_flag("--quiet", quiet, "No per-run progress on stderr");
        flags.add_hyper(app);
    }

    int run(std::ostream& os, std::ostream& err) {
        require_file(data_path);
        require_parent(out);
        auto ds = data::load_csv(data_path);
        if (exclude_feed) ds = eval::exclude_feed_length(ds);

        eval::ComparisonConfig cfg;
        cfg.training_sizes = parse_sizes(sizes);
        cfg.losses.clear();
        for (const auto& l : losses) cfg.losses.push_back(nn::parse_loss_kind(l));
        cfg.test_size = test_size;
        cfg.repeats = repeats;
        cfg.width = flags.width;
        cfg.projection = parse_projection(flags.projection);
        cfg.hyper = flags.hyper(0);
        cfg.gbt.rounds = gb_rounds;
        cfg.gbt.max_depth = gb_depth;
        cfg.gbt.shrinkage = gb_shrinkage;
        cfg.master_seed = common.seed;
        cfg.threads = common.threads;
        if (!quiet) cfg.progress = [&err](const std::string& line) { err << line << '\n'; };

        const auto reports = eval::run_comparison(models, ds, cfg);
        eval::write_report_csv(reports, out, timing);
        eval::print_report_table(reports, os);
        return kOk;
    }
};

struct Synthesize {
    Common common;
    std::string model_path;
    std::string targets_path;
    std::string out;
    std::optional<double> lp, ls, k, srf, qp, qs;

    void add(CLI::App* app) {
        common.add(app, false);
        app->add_option("--model", model_path, "Model file")->required();
        app->add_option("--targets", targets_path, "CSV with columns lp_pH,ls_pH,k,srf_GHz,qp,qs");
        app->add_option("--out", out, "Result CSV");
        app->add_option("--lp", lp, "Target primary inductance, pH");
        app->add_option("--ls", ls, "Target secondary inductance, pH");
        app->add_option("--k", k, "Target coupling coefficient");
        app->add_option("--srf", srf, "Target self-resonance frequency, GHz");
        app->add_option("--qp", qp, "Target primary quality factor");
        app->add_option("--qs", qs, "Target secondary quality factor");
    }

    std::vector<CircuitParams> read_targets() const {
        std::vector<CircuitParams> targets;
        if (!targets_path.empty()) {
            require_file(targets_path);
            std::ifstream in(targets_path);
            std::string line;
            if (!std::getline(in, line)) throw CorruptFileError(targets_path + ": missing header");
            std::vector<std::string> header;
            std::stringstream hs(trim(line));
            for (std::string f; std::getline(hs, f, ',');) header.push_back(trim(f));
            std::vector<std::size_t> cols;
            for (auto name : data::kInputColumns) {
                const auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end()) throw CorruptFileError(targets_path + ": missing column " + std::string(name));
                cols.push_back(static_cast<std::size_t>(it - header.begin()));
            }
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                std::vector<std::string> fields;
                std::stringstream ls_(trim(line));
                for (std::string f; std::getline(ls_, f, ',');) fields.push_back(trim(f));
                if (fields.size() != header.size()) throw CorruptFileError(targets_path + ": wrong field count");
                std::array<double, 6> a{};
                for (std::size_t j = 0; j < 6; ++j) {
                    try {
                        a[j] = std::stod(fields[cols[j]]);
                    } catch (const std::exception&) {
                        throw CorruptFileError(targets_path + ": bad number '" + fields[cols[j]] + "'");
                    }
                }
                targets.push_back(CircuitParams::from_array(a));
            }
        }
        const bool any_flag = lp || ls || k || srf || qp || qs;
        if (any_flag) {
            if (!(lp && ls && k && srf && qp && qs)) {
                throw UsageError("synthesize: give all of --lp --ls --k --srf --qp --qs");
            }
            targets.push_back({*lp, *ls, *k, *srf, *qp, *qs});
        }
        if (targets.empty()) throw UsageError("synthesize: no targets (use --targets or --lp ... --qs)");
        return targets;
    }

    int run(std::ostream& os, std::ostream& err) {
        require_file(model_path);
        if (!out.empty()) require_parent(out);
        const auto net = nn::load_model(model_path);
        const auto targets = read_targets();
        eval::ClosedLoopOptions opt;
        opt.constants = common.constants;
        const auto results = eval::closed_loop_validate(net, targets, opt);

        const auto flags = os.flags();
        os << std::fixed << std::setprecision(3);
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& r = results[i];
            const auto g = r.predicted;
            os << "target " << i << '\n';
            os << "  geometry   w_oa=" << g.w_oa << " w_ob=" << g.w_ob << " r0=" << g.r0 << " r1=" << g.r1
               << " x_gnd=" << g.x_gnd << " l_f=" << g.l_f << " um" << (r.clamped ? "  (clamped)" : "") << '\n';
            const auto t = r.target;
            const auto s = r.synthesized;
            os << "  targeted   lp=" << t.lp << " ls=" << t.ls << " k=" << t.k << " srf=" << t.srf << " qp=" << t.qp
               << " qs=" << t.qs << '\n';
            os << "  synthesized lp=" << s.lp << " ls=" << s.ls << " k=" << s.k << " srf=" << s.srf
               << " qp=" << s.qp << " qs=" << s.qs << '\n';
            os << "  rel. error ";
            for (double e : r.relative_error) os << ' ' << std::setprecision(4) << e;
            os << std::setprecision(3) << '\n';
            if (r.out_of_envelope) {
                err << "warning=out_of_envelope target=" << i << " message=\"target outside training inputs\"\n";
            }
        }
        os.flags(flags);
        if (!out.empty()) eval::write_closed_loop_csv(results, out);
        return kOk;
    }
};

struct Check {
    Common common;

    void add(CLI::App* app) { common.add(app, true); }

    int run(std::ostream& os) {
        const auto lines = check::run_self_checks(common.seed);
        bool ok = true;
        for (const auto& l : lines) {
            os << (l.passed ? "PASS " : "FAIL ") << l.name << ": " << l.detail << '\n';
            ok = ok && l.passed;
        }
        if (!ok) throw CheckFailed("self-check failed");
        return kOk;
    }
};

void diagnose(std::ostream& err, std::string_view kind, int code, std::string message) {
    std::replace(message.begin(), message.end(), '\n', ' ');
    std::replace(message.begin(), message.end(), '"', '\'');
    err << "error=" << kind << " code=" << code << " message=\"" << message << "\"\n";
}

std::vector<std::string> expand_config(const std::vector<std::string>& args, SurrogateConstants& constants) {
    std::optional<std::string> path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].starts_with("--config=")) path = args[i].substr(9);
    }
    if (!path || args.empty()) return args;
    std::vector<std::string> out{args.front()};
    for (auto& t : read_config(*path, constants)) out.push_back(std::move(t));
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Direct synthesis of 1:1 on-chip transformers with residual networks", "xfmr"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    GenData gen;
    Train train;
    Eval ev;
    Sweep sweep;
    Synthesize synth;
    Check chk;
    auto* gen_cmd = app.add_subcommand("gen-data", "Sample geometries and write a surrogate dataset CSV");
    auto* train_cmd = app.add_subcommand("train", "Train one network; writes a model file and a training log");
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on the held-out split");
    auto* sweep_cmd = app.add_subcommand("sweep", "Model / loss / training-size comparison with repeats");
    auto* synth_cmd = app.add_subcommand("synthesize", "Predict geometry for target circuit parameters");
    auto* check_cmd = app.add_subcommand("check", "Gradient, optimizer and metric self-tests");
    for (auto* cmd : {gen_cmd, train_cmd, eval_cmd, sweep_cmd, synth_cmd, check_cmd}) {
        cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
    gen.add(gen_cmd);
    train.add(train_cmd);
    ev.add(eval_cmd);
    sweep.add(sweep_cmd);
    synth.add(synth_cmd);
    chk.add(check_cmd);

    try {
        SurrogateConstants constants;
        const auto expanded = expand_config(args, constants);
        constants.validate();
        for (auto* c : {&gen.common, &train.common, &ev.common, &sweep.common, &synth.common, &chk.common}) {
            c->constants = constants;
        }

        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp&) {
            out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
            return kOk;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return kOk;
        } catch (const CLI::ParseError& e) {
            diagnose(err, "usage", kUsage, e.what());
            return kUsage;
        }

        if (gen_cmd->parsed()) return gen.run(out);
        if (train_cmd->parsed()) return train.run(out);
        if (eval_cmd->parsed()) return ev.run(out);
        if (sweep_cmd->parsed()) return sweep.run(out, err);
        if (synth_cmd->parsed()) return synth.run(out, err);
        if (check_cmd->parsed()) return chk.run(out);
        diagnose(err, "usage", kUsage, "no subcommand");
        return kUsage;
    } catch (const UsageError& e) {
        diagnose(err, "usage", kUsage, e.what());
        return kUsage;
    } catch (const InvalidArgument& e) {
        diagnose(err, "usage", kUsage, e.what());
        return kUsage;
    } catch (const SizeError& e) {
        diagnose(err, "usage", kUsage, e.what());
        return kUsage;
    } catch (const AlreadyExcludedError& e) {
        diagnose(err, "usage", kUsage, e.what());
        return kUsage;
    } catch (const IoError& e) {
        diagnose(err, "io", kIo, e.what());
        return kIo;
    } catch (const DivergenceError& e) {
        diagnose(err, "divergence", kNumeric, e.what());
        return kNumeric;
    } catch (const CheckFailed& e) {
        diagnose(err, "check", kNumeric, e.what());
        return kNumeric;
    } catch (const Error& e) {
        diagnose(err, "numeric", kNumeric, e.what());
        return kNumeric;
    }
}

}  // namespace xfmr::cli
