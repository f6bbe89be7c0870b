#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imb/net.hpp"
#include "imb/tensor.hpp"

namespace imb::exact {

// Dense conditional distribution of one hidden layer given each input.
// Columns index layer states in little-endian bit order: state s has unit i
// equal to bit i of s.
struct ExactLayerDistribution {
    int layer = 0;
    Matrix p;  // [n_inputs x 2^{n_l}], rows sum to 1
};

struct Budget {
    std::size_t max_states_per_layer = std::size_t{1} << 14;
    std::size_t max_table_entries = std::size_t{1} << 25;  // per [inputs x states] table
};

// z vector of a little-endian state index.
Vector state_bits(std::size_t state, int n_units);

// Transition matrix T_l[z_{l-1}, z_l] for hidden layers l >= 2.
Matrix build_transition(const NetworkParams& params, int l);

// Head probabilities for every layer-L state: [2^{n_L} x n_classes].
Matrix head_table(const NetworkParams& params);

// Exact propagation P_1[x,.] by factorized product, P_l = P_{l-1} T_l.
std::vector<ExactLayerDistribution> propagate_exact(const NetworkParams& params,
                                                    const Matrix& inputs, Budget budget = {});

// I(Z;X) in bits from p(z|x) rows and the input distribution.
double mutual_info(const Matrix& p_z_given_x, std::span<const double> px);

// I(Z;Y) in bits: builds p(z|y) = sum_x p(x|y) p(z|x) from the data joint
// p(x,y) = px[x] * py_given_x[x][y].
double layer_relevance(const Matrix& p_z_given_x, std::span<const double> px,
                       const Matrix& py_given_x);

double entropy_bits(std::span<const double> p);

// ---- Exact counterparts of the Monte-Carlo objective terms (nats) ----

// -E_{(x,y)} log p(yhat = y | x) with exact marginalization over all paths.
double exact_nll_nats(const NetworkParams& params, const Matrix& inputs,
                      std::span<const double> px, const Matrix& py_given_x);

// H~(Y|Z_l): variational conditional relevance with the network's own
// downstream path as decoder, computed by exact enumeration. l in 0..L.
double exact_vcr_nats(const NetworkParams& params, const Matrix& inputs,
                      std::span<const double> px, const Matrix& py_given_x, int l);

// True H(Y|Z_l) from the exact joint p(y, z_l).
double exact_cond_entropy_nats(const NetworkParams& params, const Matrix& inputs,
                               std::span<const double> px, const Matrix& py_given_x, int l);

// Factorized compression bound I~(Z_l;Z_{l-1}) = E_{Z_{l-1}} sum_i KL(p_i || r_i).
double exact_compression_nats(const NetworkParams& params, const Matrix& inputs,
                              std::span<const double> px, int l);

// True I(Z_l; Z_{l-1}); for l = 1 the conditioning states are the inputs.
double exact_mi_zl_zprev_nats(const NetworkParams& params, const Matrix& inputs,
                              std::span<const double> px, int l);

// ---- Small discrete systems: Lemma 1 and the conflict probe ----

struct DiscreteJoint {
    Matrix pxy;          // [|X| x |Y|]
    Matrix z1_given_x;   // [|X| x |Z1|]
    Matrix z2_given_z1;  // [|Z1| x |Z2|]

    void validate() const;
};

// Residuals of the chain identities I(Z2;V) = I(Z1;V) - I(Z1;V|Z2) for
// V in {X, Y}, by exact summation over p(x,y,z1,z2). Nats.
struct Lemma1Residuals {
    double delta_x = 0.0;
    double delta_y = 0.0;
};
Lemma1Residuals lemma1_residuals(const DiscreteJoint& dj);

enum class Channel2Mode { full_grid, fixed_copy, constant_family };

struct ProbeConfig {
    double beta1 = 1.0;
    double beta2 = 1.0;
    int grid = 21;                 // points per simplex coordinate
    Channel2Mode mode = Channel2Mode::full_grid;
    double tol_scale = 1e-9;       // tolerance = tol_scale * objective range
};

struct ProbeReport {
    std::string verdict;  // conflicting | non-conflicting (condition a|b) | inconclusive
    bool conflicting = false;
    bool inconclusive = false;
    double min_l1 = 0.0, min_l2 = 0.0;
    double tol1 = 0.0, tol2 = 0.0;
    std::size_t argmin1_count = 0, argmin2_count = 0, grid_pairs = 0;
    Vector witness1_encoder;             // p(z1=1|x) minimizing L1
    Vector witness2_encoder;             // p(z1=1|x) of an L2 minimizer
    Vector witness2_channel;             // (p(z2=1|z1=0), p(z2=1|z1=1))
    std::optional<Vector> joint_witness_encoder;  // encoder minimizing both, if any
    std::optional<Vector> joint_witness_channel;
    std::string to_json() const;
};

// Grid-enumerates binary encoders p(z1|x) and channels p(z2|z1) and compares
// the argmin sets of L_l = I(Z_l;X) - beta_l I(Z_l;Y). Requires H(Y|X) > 0.
ProbeReport conflict_probe(const Matrix& pxy, const ProbeConfig& cfg);

// Builtin probe instances (|X| = 4, |Y| = 2, label noise 0.1).
Matrix builtin_probe_joint();

// ---- Information plane ----

struct InfoPlanePoint {
    int epoch = 0;
    int layer = 0;
    double i_zx_bits = 0.0;
    double i_zy_bits = 0.0;
};

struct InfoPlaneResult {
    std::vector<InfoPlanePoint> points;         // ordered by (epoch, layer)
    std::vector<std::string> dpi_violations;    // epochs/layers exceeding 1e-6 bits
};

// Exact (I(Z_l;X), I(Z_l;Y)) for every checkpoint and layer; checks the
// data-processing inequality along consecutive layers at each epoch.
InfoPlaneResult info_plane_trace(std::span<const std::pair<int, const NetworkParams*>> checkpoints,
                                 const Matrix& inputs, std::span<const double> px,
                                 const Matrix& py_given_x, Budget budget = {});

}  // namespace imb::exact
