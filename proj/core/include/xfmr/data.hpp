#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace xfmr::data {

inline constexpr std::size_t kInputDim = 6;
inline constexpr std::size_t kFullTargetDim = 6;
inline constexpr std::size_t kFeedLengthColumn = 5;

inline constexpr std::array<std::string_view, kInputDim> kInputColumns = {
    "lp_pH", "ls_pH", "k", "srf_GHz", "qp", "qs"};
inline constexpr std::array<std::string_view, kFullTargetDim> kTargetColumns = {
    "w_oa_um", "w_ob_um", "r0_um", "r1_um", "x_gnd_um", "l_f_um"};

/// Paired samples: one row per sample. `x` holds circuit parameters
/// (lp, ls, k, srf, qp, qs); `y` holds geometry (w_oa, w_ob, r0, r1, x_gnd
/// and, unless excluded, l_f).
struct Dataset {
    Eigen::MatrixXd x;
    Eigen::MatrixXd y;

    std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t target_dim() const { return static_cast<std::size_t>(y.cols()); }
    bool has_feed_length() const { return target_dim() == kFullTargetDim; }

    /// Throws ShapeError / DomainError when the invariants do not hold:
    /// equal row counts, six inputs, five or six targets, finite entries,
    /// strictly positive targets.
    void validate() const;

    Dataset subset(std::span<const std::size_t> rows) const;
};

/// Test set is drawn first from one seeded permutation and the training set
/// follows it, so every training size under one seed shares the same test set
/// and smaller training sets are prefixes of larger ones.
struct Split {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

Split split(const Dataset& ds, std::size_t test_n, std::size_t train_n, std::uint64_t seed);

/// Per-feature affine map to zero mean and unit population standard deviation.
class Standardizer {
public:
    Standardizer() = default;
    Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev);

    /// Fits on the rows of `x`. Throws DegenerateFeatureError on a constant column.
    static Standardizer fit(const Eigen::MatrixXd& x);

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& stddev() const { return stddev_; }
    std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd stddev_;
};

inline Standardizer fit_standardizer(const Dataset& train) { return Standardizer::fit(train.x); }

/// Shuffled partition of [0, n) into batches of `batch_size`; the last batch
/// may be short. Deterministic in (seed, epoch).
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch);

void save_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

/// Formats with 17 significant digits so values survive a text round trip.
std::string format_double(double v);

}  // namespace xfmr::data
