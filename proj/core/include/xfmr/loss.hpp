#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace xfmr::nn {

/// Relative-error training losses. Matrices are (samples x dimensions).
enum class LossKind { smse, sdmse };

std::string_view to_string(LossKind kind);
/// Accepts "smse" / "sdmse" (case-insensitive); throws InvalidArgument otherwise.
LossKind parse_loss_kind(std::string_view name);

/// Mean over all entries of ((y - y_hat) / y)^2.
double loss_smse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

/// Mean over dimensions of the per-dimension root mean squared relative error.
double loss_sdmse(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

double loss(LossKind kind, const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

/// d loss / d y_hat, same shape as y_hat. For SDMSE a dimension whose error is
/// exactly zero contributes a zero subgradient.
Eigen::MatrixXd loss_gradient(LossKind kind, const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y);

}  // namespace xfmr::nn
