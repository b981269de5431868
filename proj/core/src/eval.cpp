#include "xfmr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

#include "xfmr/errors.hpp"
#include "xfmr/random.hpp"

namespace xfmr::eval {

double r2_score(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols()) throw ShapeError("r2_score: shape mismatch");
    if (y.rows() < 2) throw SizeError("r2_score: need at least two samples");
    double total = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double mean = y.col(j).mean();
        const double ss_tot = (y.col(j).array() - mean).square().sum();
        if (!(ss_tot > 0.0)) {
            throw DegenerateFeatureError("r2_score: target dimension " + std::to_string(j) + " is constant");
        }
        const double ss_res = (y.col(j) - y_hat.col(j)).squaredNorm();
        total += 1.0 - ss_res / ss_tot;
    }
    return total / static_cast<double>(y.cols());
}

Eigen::VectorXd per_param_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    nn::loss_smse(y_hat, y);  // shape and zero-target checks
    return ((y.array() - y_hat.array()) / y.array()).square().colwise().mean().transpose();
}

data::Dataset exclude_feed_length(const data::Dataset& ds) {
    if (!ds.has_feed_length()) throw AlreadyExcludedError("feed length already excluded");
    data::Dataset out;
    out.x = ds.x;
    out.y = ds.y.leftCols(static_cast<Eigen::Index>(data::kFeedLengthColumn));
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw SizeError("quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile: q outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ModelSpec ModelSpec::parse(std::string_view name) {
    std::string upper;
    for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (upper == "LR") return {"LR", ModelFamily::linear};
    if (upper == "GB") return {"GB", ModelFamily::boosting};
    nn::make_preset(name, 1);  // throws on unknown names
    std::string canonical;
    for (char c : upper) {
        if (c != '_') canonical.push_back(c);
    }
    return {canonical, ModelFamily::network};
}

namespace {

struct Outcome {
    double smse = 0.0;
    double r2 = 0.0;
    Eigen::VectorXd per_param;
    double seconds = 0.0;
};

struct Task {
    std::size_t model = 0;
    std::size_t loss = 0;
    std::size_t size = 0;
    std::size_t repeat = 0;
};

Outcome run_one(const ModelSpec& spec, nn::LossKind loss, std::size_t train_size, std::size_t repeat,
                const data::Dataset& ds, const ComparisonConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const auto parts = data::split(ds, cfg.test_size, train_size, derive_seed(cfg.master_seed, "split", repeat));
    if (parts.train.size() == 0) throw SizeError("run_comparison: training size must be positive");

    Eigen::MatrixXd y_hat;
    switch (spec.family) {
        case ModelFamily::linear: {
            const auto sc = data::fit_standardizer(parts.train);
            const auto m = baselines::fit_linear(sc.apply(parts.train.x), parts.train.y);
            y_hat = baselines::predict_linear(m, sc.apply(parts.test.x));
            break;
        }
        case ModelFamily::boosting: {
            const auto sc = data::fit_standardizer(parts.train);
            const auto m = baselines::fit_gbt(sc.apply(parts.train.x), parts.train.y, cfg.gbt);
            y_hat = baselines::predict_gbt(m, sc.apply(parts.test.x));
            break;
        }
        case ModelFamily::network: {
            auto arch = nn::make_preset(spec.name, cfg.width, data::kInputDim, ds.target_dim());
            arch.projection = cfg.projection;
            nn::HyperParams hp = cfg.hyper;
            hp.seed = derive_seed(cfg.master_seed, "train", repeat);
            const auto trained = nn::train(arch, parts.train, hp, loss);
            y_hat = trained.network.predict(parts.test.x);
            break;
        }
    }

    Outcome o;
    o.smse = nn::loss_smse(y_hat, parts.test.y);
    o.r2 = r2_score(y_hat, parts.test.y);
    o.per_param = per_param_smse(y_hat, parts.test.y);
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return o;
}

std::pair<double, double> mean_and_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

std::vector<ExperimentReport> run_comparison(const std::vector<std::string>& models, const data::Dataset& ds,
                                             const ComparisonConfig& cfg) {
    ds.validate();
    if (cfg.repeats < 1) throw InvalidArgument("run_comparison: repeats must be >= 1");
    if (models.empty() || cfg.training_sizes.empty() || cfg.losses.empty()) {
        throw InvalidArgument("run_comparison: models, sizes and losses must be non-empty");
    }
    for (auto size : cfg.training_sizes) {
        if (size + cfg.test_size > ds.size()) {
            throw SizeError("run_comparison: training size " + std::to_string(size) + " + test size " +
                            std::to_string(cfg.test_size) + " exceeds dataset size " + std::to_string(ds.size()));
        }
    }
    std::vector<ModelSpec> specs;
    for (const auto& m : models) specs.push_back(ModelSpec::parse(m));

    // Baselines ignore the training loss, so they run once per (size, repeat)
    // and the outcome is shared by every loss column.
    std::vector<Task> tasks;
    for (std::size_t mi = 0; mi < specs.size(); ++mi) {
        const std::size_t loss_count = specs[mi].family == ModelFamily::network ? cfg.losses.size() : 1;
        for (std::size_t li = 0; li < loss_count; ++li) {
            for (std::size_t si = 0; si < cfg.training_sizes.size(); ++si) {
                for (std::size_t r = 0; r < cfg.repeats; ++r) tasks.push_back({mi, li, si, r});
            }
        }
    }

    std::vector<Outcome> outcomes(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::mutex progress_mutex;

    auto work = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& t = tasks[i];
            const auto& spec = specs[t.model];
            const auto loss = cfg.losses[t.loss];
            const auto size = cfg.training_sizes[t.size];
            try {
                outcomes[i] = run_one(spec, loss, size, t.repeat, ds, cfg);
            } catch (const Error& e) {
                std::lock_guard lock(error_mutex);
                if (!first_error) {
                    const std::string tag = "[" + spec.name + " loss=" + std::string(nn::to_string(loss)) +
                                            " size=" + std::to_string(size) +
                                            " repeat=" + std::to_string(t.repeat) + "] ";
                    if (const auto* d = dynamic_cast<const DivergenceError*>(&e)) {
                        first_error = std::make_exception_ptr(DivergenceError(tag + e.what(), d->epoch(), d->step()));
                    } else {
                        first_error = std::make_exception_ptr(Error(tag + e.what()));
                    }
                }
                next = tasks.size();
                return;
            }
            if (cfg.progress) {
                std::lock_guard lock(progress_mutex);
                char buf[160];
                std::snprintf(buf, sizeof buf, "%s loss=%s size=%zu repeat=%zu smse=%.6g r2=%.6g (%.1fs)",
                              spec.name.c_str(), std::string(nn::to_string(loss)).c_str(), size, t.repeat,
                              outcomes[i].smse, outcomes[i].r2, outcomes[i].seconds);
                cfg.progress(buf);
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, tasks.size());
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<ExperimentReport> reports;
    for (std::size_t mi = 0; mi < specs.size(); ++mi) {
        const bool shared = specs[mi].family != ModelFamily::network;
        for (std::size_t li = 0; li < cfg.losses.size(); ++li) {
            for (std::size_t si = 0; si < cfg.training_sizes.size(); ++si) {
                std::vector<double> smse;
                std::vector<double> r2;
                ExperimentReport rep;
                rep.model = specs[mi].name;
                rep.loss = cfg.losses[li];
                rep.training_size = cfg.training_sizes[si];
                rep.target_dim = ds.target_dim();
                rep.repeats = cfg.repeats;
                rep.per_param_smse = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.target_dim()));
                for (std::size_t i = 0; i < tasks.size(); ++i) {
                    const auto& t = tasks[i];
                    if (t.model != mi || t.size != si || t.loss != (shared ? 0 : li)) continue;
                    smse.push_back(outcomes[i].smse);
                    r2.push_back(outcomes[i].r2);
                    rep.per_param_smse += outcomes[i].per_param;
                    rep.seconds += outcomes[i].seconds;
                }
                rep.per_param_smse /= static_cast<double>(cfg.repeats);
                std::tie(rep.smse_mean, rep.smse_std) = mean_and_std(smse);
                std::tie(rep.r2_mean, rep.r2_std) = mean_and_std(r2);
                reports.push_back(std::move(rep));
            }
        }
    }
    return reports;
}

ExperimentReport evaluate_predictions(std::string model, nn::LossKind loss, std::size_t training_size,
                                      const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    ExperimentReport rep;
    rep.model = std::move(model);
    rep.loss = loss;
    rep.training_size = training_size;
    rep.target_dim = static_cast<std::size_t>(y.cols());
    rep.repeats = 1;
    rep.smse_mean = nn::loss_smse(y_hat, y);
    rep.r2_mean = r2_score(y_hat, y);
    rep.per_param_smse = per_param_smse(y_hat, y);
    return rep;
}

void write_report_csv(std::span<const ExperimentReport> reports, std::ostream& out, bool include_timing) {
    out << "model,loss,train_size,targets,repeats,smse_mean,smse_std,r2_mean,r2_std";
    for (auto c : data::kTargetColumns) out << ",smse_" << c;
    if (include_timing) out << ",seconds";
    out << '\n';
    for (const auto& r : reports) {
        out << r.model << ',' << nn::to_string(r.loss) << ',' << r.training_size << ',' << r.target_dim << ','
            << r.repeats << ',' << data::format_double(r.smse_mean) << ',' << data::format_double(r.smse_std)
            << ',' << data::format_double(r.r2_mean) << ',' << data::format_double(r.r2_std);
        for (std::size_t j = 0; j < data::kFullTargetDim; ++j) {
            out << ',';
            if (static_cast<Eigen::Index>(j) < r.per_param_smse.size()) {
                out << data::format_double(r.per_param_smse(static_cast<Eigen::Index>(j)));
            }
        }
        if (include_timing) out << ',' << data::format_double(r.seconds);
        out << '\n';
    }
}

void write_report_csv(std::span<const ExperimentReport> reports, const std::filesystem::path& path,
                      bool include_timing) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_report_csv(reports, out, include_timing);
    if (!out) throw IoError("write failed for " + path.string());
}

void print_report_table(std::span<const ExperimentReport> reports, std::ostream& out) {
    const auto flags = out.flags();
    out << std::left << std::setw(6) << "model" << std::setw(7) << "loss" << std::right << std::setw(7) << "train"
        << std::setw(5) << "dim" << std::setw(5) << "rep" << std::setw(12) << "SMSE" << std::setw(11) << "+/-"
        << std::setw(9) << "R2" << std::setw(9) << "+/-" << std::setw(9) << "sec" << '\n';
    for (const auto& r : reports) {
        out << std::left << std::setw(6) << r.model << std::setw(7) << nn::to_string(r.loss) << std::right
            << std::setw(7) << r.training_size << std::setw(5) << r.target_dim << std::setw(5) << r.repeats
            << std::scientific << std::setprecision(3) << std::setw(12) << r.smse_mean << std::setw(11)
            << r.smse_std << std::fixed << std::setprecision(4) << std::setw(9) << r.r2_mean << std::setw(9)
            << r.r2_std << std::setprecision(1) << std::setw(9) << r.seconds << '\n';
    }
    out.flags(flags);
}

// ---------------------------------------------------------------------------

std::vector<ClosedLoopResult> closed_loop_validate(const nn::Network& network,
                                                   std::span<const CircuitParams> targets,
                                                   const ClosedLoopOptions& options) {
    const auto out_dim = network.model.architecture().output_dim;
    if (out_dim != 6 && out_dim != 5) throw ShapeError("closed_loop_validate: network must predict 5 or 6 targets");
    if (targets.empty()) return {};

    Eigen::MatrixXd x(static_cast<Eigen::Index>(targets.size()), 6);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        validate(targets[i]);
        const auto a = targets[i].to_array();
        for (Eigen::Index j = 0; j < 6; ++j) x(static_cast<Eigen::Index>(i), j) = a[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd y_hat = network.predict(x);

    std::vector<ClosedLoopResult> results;
    results.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        ClosedLoopResult r;
        r.target = targets[i];
        std::array<double, 6> g{};
        for (Eigen::Index j = 0; j < y_hat.cols(); ++j) g[static_cast<std::size_t>(j)] = y_hat(row, j);
        if (out_dim == 5) g[5] = options.fallback_feed_length;
        r.raw_prediction = TransformerGeometry::from_array(g);
        r.predicted = options.bounds.clamp(r.raw_prediction);
        r.clamped = !(r.predicted == r.raw_prediction);
        r.synthesized = forward_model(r.predicted, options.constants);
        const auto want = r.target.to_array();
        const auto got = r.synthesized.to_array();
        for (std::size_t j = 0; j < 6; ++j) r.relative_error[j] = std::abs(got[j] - want[j]) / std::abs(want[j]);
        r.out_of_envelope = !network.envelope.contains(x.row(row).transpose());
        results.push_back(r);
    }
    return results;
}

ClosedLoopSummary summarize(std::span<const ClosedLoopResult> results) {
    if (results.empty()) throw SizeError("summarize: no results");
    ClosedLoopSummary s;
    for (std::size_t j = 0; j < 6; ++j) {
        std::vector<double> errs;
        errs.reserve(results.size());
        for (const auto& r : results) errs.push_back(r.relative_error[j]);
        s.median[j] = quantile(errs, 0.5);
        s.p90[j] = quantile(std::move(errs), 0.9);
    }
    for (const auto& r : results) s.flagged += r.out_of_envelope ? 1 : 0;
    return s;
}

void write_closed_loop_csv(std::span<const ClosedLoopResult> results, std::ostream& out) {
    static constexpr std::array<std::string_view, 6> kErr = {"err_lp", "err_ls", "err_k",
                                                             "err_srf", "err_qp", "err_qs"};
    for (auto c : data::kInputColumns) out << "target_" << c << ',';
    for (auto c : data::kTargetColumns) out << c << ',';
    for (auto c : data::kInputColumns) out << "synth_" << c << ',';
    for (auto c : kErr) out << c << ',';
    out << "clamped,out_of_envelope\n";
    for (const auto& r : results) {
        for (double v : r.target.to_array()) out << data::format_double(v) << ',';
        for (double v : r.predicted.to_array()) out << data::format_double(v) << ',';
        for (double v : r.synthesized.to_array()) out << data::format_double(v) << ',';
        for (double v : r.relative_error) out << data::format_double(v) << ',';
        out << (r.clamped ? 1 : 0) << ',' << (r.out_of_envelope ? 1 : 0) << '\n';
    }
}

void write_closed_loop_csv(std::span<const ClosedLoopResult> results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_closed_loop_csv(results, out);
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace xfmr::eval
