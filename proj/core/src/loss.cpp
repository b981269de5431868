#include "xfmr/loss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "xfmr/errors.hpp"

namespace xfmr::nn {
namespace {

void check_shapes(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols()) throw ShapeError("loss: shape mismatch");
    if (y.size() == 0) throw ShapeError("loss: empty input");
    if ((y.array() == 0.0).any()) throw DomainError("loss: zero target entry in relative error");
}

Eigen::ArrayXXd relative_error(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    return (y.array() - y_hat.array()) / y.array();
}

}  // namespace

std::string_view to_string(LossKind kind) { return kind == LossKind::smse ? "smse" : "sdmse"; }

LossKind parse_loss_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "smse") return LossKind::smse;
    if (lower == "sdmse") return LossKind::sdmse;
    throw InvalidArgument("unknown loss '" + std::string(name) + "' (expected smse or sdmse)");
}

double loss_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    check_shapes(y_hat, y);
    return relative_error(y_hat, y).square().mean();
}

double loss_sdmse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    check_shapes(y_hat, y);
    const Eigen::ArrayXXd e2 = relative_error(y_hat, y).square();
    return e2.colwise().mean().sqrt().mean();
}

double loss(LossKind kind, const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    return kind == LossKind::smse ? loss_smse(y_hat, y) : loss_sdmse(y_hat, y);
}

Eigen::MatrixXd loss_gradient(LossKind kind, const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y) {
    check_shapes(y_hat, y);
    const double n = static_cast<double>(y.rows());
    const double k = static_cast<double>(y.cols());
    const Eigen::ArrayXXd e = relative_error(y_hat, y);
    // d e / d y_hat = -1 / y
    const Eigen::ArrayXXd de = -1.0 / y.array();

    if (kind == LossKind::smse) {
        return (2.0 / (n * k)) * e * de;
    }
    Eigen::MatrixXd grad(y.rows(), y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double rms = std::sqrt(e.col(j).square().mean());
        if (rms == 0.0) {
            grad.col(j).setZero();
        } else {
            grad.col(j) = (e.col(j) * de.col(j) / (k * n * rms)).matrix();
        }
    }
    return grad;
}

}  // namespace xfmr::nn
