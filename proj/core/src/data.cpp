#include "xfmr/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "xfmr/errors.hpp"
#include "xfmr/random.hpp"

namespace xfmr::data {

void Dataset::validate() const {
    if (x.rows() != y.rows()) throw ShapeError("dataset: x and y row counts differ");
    if (static_cast<std::size_t>(x.cols()) != kInputDim) throw ShapeError("dataset: x must have 6 columns");
    if (y.cols() != 6 && y.cols() != 5) throw ShapeError("dataset: y must have 5 or 6 columns");
    if (!x.allFinite() || !y.allFinite()) throw DomainError("dataset: non-finite entry");
    if (y.size() > 0 && y.minCoeff() <= 0.0) throw DomainError("dataset: targets must be strictly positive");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        if (r >= x.rows()) throw SizeError("dataset: subset row out of range");
        out.x.row(static_cast<Eigen::Index>(i)) = x.row(r);
        out.y.row(static_cast<Eigen::Index>(i)) = y.row(r);
    }
    return out;
}

Split split(const Dataset& ds, std::size_t test_n, std::size_t train_n, std::uint64_t seed) {
    const std::size_t n = ds.size();
    if (test_n + train_n > n) {
        throw SizeError("split: test_n + train_n = " + std::to_string(test_n + train_n) +
                        " exceeds dataset size " + std::to_string(n));
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(perm, rng);

    Split s;
    s.test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_n));
    s.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(test_n),
                        perm.begin() + static_cast<std::ptrdiff_t>(test_n + train_n));
    s.test = ds.subset(s.test_rows);
    s.train = ds.subset(s.train_rows);
    return s;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
    if (mean_.size() != stddev_.size()) throw ShapeError("standardizer: mean/std size mismatch");
    if (stddev_.size() > 0 && !(stddev_.minCoeff() > 0.0)) {
        throw DegenerateFeatureError("standardizer: std entries must be strictly positive");
    }
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    if (x.rows() == 0) throw SizeError("standardizer: cannot fit on an empty set");
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    Eigen::VectorXd sd(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (x.col(j).maxCoeff() == x.col(j).minCoeff()) {
            throw DegenerateFeatureError("standardizer: feature " + std::to_string(j) + " is constant");
        }
        const double var = (x.col(j).array() - mean(j)).square().mean();
        sd(j) = std::sqrt(var);
    }
    return Standardizer(mean, sd);
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != dim()) throw ShapeError("standardizer: column count mismatch");
    return (x.rowwise() - mean_.transpose()).array().rowwise() / stddev_.transpose().array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& z) const {
    if (static_cast<std::size_t>(z.cols()) != dim()) throw ShapeError("standardizer: column count mismatch");
    Eigen::MatrixXd x = z.array().rowwise() * stddev_.transpose().array();
    return x.rowwise() + mean_.transpose();
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0 || batch_size > n) throw InvalidArgument("minibatches: need 1 <= b <= n");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "minibatch", epoch));
    shuffle(perm, rng);

    std::vector<std::vector<std::size_t>> batches;
    batches.reserve((n + batch_size - 1) / batch_size);
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(n, start + batch_size);
        batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                             perm.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

std::string format_double(double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    std::string header;
    for (auto c : kInputColumns) header.append(c).push_back(',');
    for (std::size_t j = 0; j < ds.target_dim(); ++j) {
        header.append(kTargetColumns[j]);
        if (j + 1 < ds.target_dim()) header.push_back(',');
    }
    out << header << '\n';

    std::string line;
    for (Eigen::Index i = 0; i < ds.x.rows(); ++i) {
        line.clear();
        for (Eigen::Index j = 0; j < ds.x.cols(); ++j) line.append(format_double(ds.x(i, j))).push_back(',');
        for (Eigen::Index j = 0; j < ds.y.cols(); ++j) {
            line.append(format_double(ds.y(i, j)));
            if (j + 1 < ds.y.cols()) line.push_back(',');
        }
        out << line << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

double parse_double(std::string_view field, std::size_t line_no) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw CorruptFileError("csv line " + std::to_string(line_no) + ": bad number '" +
                               std::string(field) + "'");
    }
    return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw CorruptFileError(path.string() + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_fields(line);
    if (header.size() != 11 && header.size() != 12) {
        throw CorruptFileError(path.string() + ": expected 11 or 12 columns in header");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        const auto expected = j < kInputDim ? kInputColumns[j] : kTargetColumns[j - kInputDim];
        if (header[j] != expected) {
            throw CorruptFileError(path.string() + ": unexpected header column '" + std::string(header[j]) + "'");
        }
    }
    const std::size_t target_dim = header.size() - kInputDim;

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw CorruptFileError("csv line " + std::to_string(line_no) + ": wrong field count");
        }
        for (auto f : fields) values.push_back(parse_double(f, line_no));
        ++rows;
    }

    Dataset ds;
    ds.x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kInputDim));
    ds.y.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(target_dim));
    const std::size_t width = header.size();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < kInputDim; ++j) {
            ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * width + j];
        }
        for (std::size_t j = 0; j < target_dim; ++j) {
            ds.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * width + kInputDim + j];
        }
    }
    ds.validate();
    return ds;
}

}  // namespace xfmr::data
