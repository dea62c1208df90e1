#pragma once

// PointNet interpolation + sensor embedding + MLP harmonization head.
//
//   per neighbor (dx, dy, dz, i) -> 64 -> 128 (shared, ReLU) -> max-pool
//   -> 64 (ReLU) -> 1 -> sigmoid = I_x
//   [I_x, e_source - e_target] -> 100 (ReLU, dropout) -> 1 -> sigmoid = H_x

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "lidarharm/dataset.hpp"
#include "lidarharm/params.hpp"
#include "lidarharm/random.hpp"

namespace lidarharm {

struct ModelShape {
    std::size_t point_hidden1 = 64;
    std::size_t point_hidden2 = 128;
    std::size_t post_hidden = 64;
    std::size_t embedding_dim = 3;
    std::size_t dictionary = kDictionarySize;
    std::size_t head_hidden = 100;
};

inline constexpr std::size_t kPointFeatures = 4;

std::vector<BlockSpec> model_layout(const ModelShape& shape = {});
/// The embedding table and head blocks alone, for the stand-alone MLP head.
std::vector<BlockSpec> head_layout(const ModelShape& shape = {});

/// Glorot-uniform weights, zero biases, N(0, 0.1) embedding rows.
void initialize_params(ParamSet& params, std::uint64_t seed);

enum class Mode { train, eval };
enum class LossKind { l1, l2 };

/// Block positions of the harmonization head inside a ParamSet.
struct HeadBlocks {
    std::size_t embedding, w1, b1, w2, b2;
    static HeadBlocks find(const ParamSet& params);
};

struct PointNetBlocks {
    std::size_t w1, b1, w2, b2, w3, b3, w4, b4;
    static PointNetBlocks find(const ParamSet& params);
};

struct HeadTrace {
    Eigen::VectorXd input; ///< [I, e_s - e_t]
    Eigen::VectorXd pre;
    Eigen::VectorXd act;  ///< ReLU(pre)
    Eigen::VectorXd mask; ///< 0 or 1/(1-p) in train mode, all ones in eval mode
    double pre_out = 0.0;
    double output = 0.0;
    std::uint16_t source_id = 0;
    std::uint16_t target_id = 0;
};

/// Every intermediate needed for exact backpropagation.
struct ForwardTrace {
    Eigen::MatrixXd input; ///< 4 x n neighbor features
    Eigen::MatrixXd pre1, pre2;
    Eigen::MatrixXd act1;
    Eigen::VectorXd pooled;
    std::vector<std::int32_t> argmax; ///< neighbor chosen by the max-pool per channel (first on ties)
    Eigen::VectorXd pre3, act3;
    double pre4 = 0.0;
    double interp = 0.0; ///< I_x
    HeadTrace head;
};

struct Prediction {
    double interp = 0.0;  ///< I_x
    double harmonized = 0.0; ///< H_x
};

/// Dropout behaviour for one forward pass. In train mode the mask is drawn
/// from `rng`, unless `fixed_mask` is given (used to replay a trace).
struct DropoutControl {
    Mode mode = Mode::eval;
    double rate = 0.0;
    Rng* rng = nullptr;
    const Eigen::VectorXd* fixed_mask = nullptr;
};

/// Throws DomainError on an empty neighborhood or an id outside the dictionary.
Prediction forward(const ParamSet& params, std::span<const NeighborFeature> neighbors, std::uint16_t source_id,
                   std::uint16_t target_id, const DropoutControl& dropout, ForwardTrace& trace);

Prediction forward(const ParamSet& params, const Example& example, const DropoutControl& dropout, ForwardTrace& trace);

/// Deterministic eval-mode prediction.
Prediction predict(const ParamSet& params, std::span<const NeighborFeature> neighbors, std::uint16_t source_id,
                   std::uint16_t target_id);

/// Head alone: H = head([interp, e_s - e_t]).
double head_forward(const ParamSet& params, const HeadBlocks& blocks, double interp, std::uint16_t source_id,
                    std::uint16_t target_id, const DropoutControl& dropout, HeadTrace& trace);

/// Accumulates dL/dθ for the head into `grad` and returns dL/d(interp).
double head_backward(const ParamSet& params, const HeadBlocks& blocks, const HeadTrace& trace, double d_output,
                     ParamSet& grad);

/// Accumulates the gradient of a loss with partials dL/dI_x = d_interp and
/// dL/dH_x = d_harmonized into `grad` (same layout as params).
void backward(const ParamSet& params, const ForwardTrace& trace, double d_interp, double d_harmonized, ParamSet& grad);

struct LossTerms {
    double interp = 0.0;     ///< ℓ_I
    double harmonized = 0.0; ///< ℓ_H
    double total = 0.0;      ///< ℓ_I + ℓ_H
};

double rho(double prediction, double truth, LossKind kind);
/// d rho / d prediction; the L1 subgradient at zero is 0.
double rho_grad(double prediction, double truth, LossKind kind);

LossTerms loss(double interp, double harmonized, double gt_interp, double gt_harm, LossKind kind);

double sigmoid(double t);

} // namespace lidarharm
