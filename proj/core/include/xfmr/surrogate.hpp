#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "xfmr/data.hpp"
#include "xfmr/random.hpp"

namespace xfmr {

/// Geometry of a single-turn 1:1 transformer, all lengths in micrometres.
struct TransformerGeometry {
    double w_oa = 0.0;   // primary trace width
    double w_ob = 0.0;   // secondary trace width
    double r0 = 0.0;     // primary coil radius
    double r1 = 0.0;     // secondary coil radius
    double x_gnd = 0.0;  // ground spacing
    double l_f = 0.0;    // feed length

    std::array<double, 6> to_array() const { return {w_oa, w_ob, r0, r1, x_gnd, l_f}; }
    static TransformerGeometry from_array(const std::array<double, 6>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }
    bool operator==(const TransformerGeometry&) const = default;
};

/// Electrical parameters: inductances in pH, SRF in GHz, k and Q unitless.
struct CircuitParams {
    double lp = 0.0;
    double ls = 0.0;
    double k = 0.0;
    double srf = 0.0;
    double qp = 0.0;
    double qs = 0.0;

    std::array<double, 6> to_array() const { return {lp, ls, k, srf, qp, qs}; }
    static CircuitParams from_array(const std::array<double, 6>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }
    bool operator==(const CircuitParams&) const = default;
};

/// Coefficients of the closed-form forward model.
struct SurrogateConstants {
    double mu = 1.2566;     // pH/um
    double alpha_f = 2.0;   // pH/um of feed line
    double k_max = 0.9;
    double gamma_k = 3.5;
    double r_sh = 0.043;    // ohm/square
    double f_ref = 30.0;    // GHz
    double c_a = 0.36;      // fF/um
    double c_f = 0.10;      // fF/um
    double x_ref = 20.0;    // um

    /// Throws InvalidArgument unless every constant is finite and positive.
    void validate() const;
};

/// Box from which geometries are sampled; r1 is drawn as r0 * rho with
/// rho in [1, r1_ratio_max] and clamped to r1_max.
struct GeometryBounds {
    double w_min = 2.0, w_max = 16.0;
    double r0_min = 35.0, r0_max = 70.0;
    double r1_ratio_max = 1.5;
    double r1_max = 85.0;
    double x_gnd_min = 50.0, x_gnd_max = 90.0;
    double l_f_min = 10.0, l_f_max = 35.0;

    bool contains(const TransformerGeometry& g) const;
    /// Projects each field into its bounds (r1 into [r0, min(ratio * r0, r1_max)]).
    TransformerGeometry clamp(const TransformerGeometry& g) const;
};

void validate(const TransformerGeometry& g);
void validate(const CircuitParams& c);

/// Geometry to circuit parameters. Pure; throws DomainError when a log or
/// sqrt argument is non-positive.
CircuitParams forward_model(const TransformerGeometry& g, const SurrogateConstants& c = {});

TransformerGeometry sample_geometry(Rng& rng, const GeometryBounds& bounds = {});

struct DatasetOptions {
    SurrogateConstants constants{};
    GeometryBounds bounds{};
    /// Standard deviation of multiplicative Gaussian noise applied to the
    /// circuit parameters. Zero keeps forward_model(y) == x exact.
    double noise_sigma = 0.0;
    /// Worker threads; output does not depend on this.
    unsigned threads = 1;
};

/// n samples, each from its own derived seed so the result is a function of
/// (n, seed) only.
data::Dataset generate_dataset(std::size_t n, std::uint64_t seed, const DatasetOptions& options = {});

}  // namespace xfmr
