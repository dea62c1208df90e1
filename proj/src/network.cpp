#include "lidarharm/network.hpp"

#include <cmath>

#include "lidarharm/error.hpp"

namespace lidarharm {

namespace {

void check_ids(std::uint16_t source_id, std::uint16_t target_id, std::size_t dictionary)
{
    if (source_id >= dictionary || target_id >= dictionary)
        throw DomainError("scan id " + std::to_string(std::max(source_id, target_id)) +
                          " outside embedding dictionary of size " + std::to_string(dictionary));
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out)
{
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

} // namespace

double sigmoid(double t)
{
    if (t >= 0.0)
        return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

std::vector<BlockSpec> model_layout(const ModelShape& s)
{
    std::vector<BlockSpec> layout = {
        {"pointnet.w1", s.point_hidden1, kPointFeatures},
        {"pointnet.b1", s.point_hidden1, 0},
        {"pointnet.w2", s.point_hidden2, s.point_hidden1},
        {"pointnet.b2", s.point_hidden2, 0},
        {"pointnet.w3", s.post_hidden, s.point_hidden2},
        {"pointnet.b3", s.post_hidden, 0},
        {"pointnet.w4", 1, s.post_hidden},
        {"pointnet.b4", 1, 0},
    };
    for (auto& b : head_layout(s))
        layout.push_back(b);
    return layout;
}

std::vector<BlockSpec> head_layout(const ModelShape& s)
{
    return {
        {"embedding", s.dictionary, s.embedding_dim},
        {"head.w1", s.head_hidden, 1 + s.embedding_dim},
        {"head.b1", s.head_hidden, 0},
        {"head.w2", 1, s.head_hidden},
        {"head.b2", 1, 0},
    };
}

void initialize_params(ParamSet& params, std::uint64_t seed)
{
    Rng rng = make_rng(seed, {0x1417});
    for (std::size_t b = 0; b < params.layout().size(); ++b) {
        const BlockSpec& spec = params.layout()[b];
        auto values = params.block(b);
        if (spec.name == "embedding") {
            for (double& v : values)
                v = 0.1 * standard_normal(rng);
        } else if (spec.rank() == 1) {
            std::fill(values.begin(), values.end(), 0.0);
        } else {
            const double limit = glorot_limit(spec.cols, spec.rows);
            for (double& v : values)
                v = limit * (2.0 * uniform01(rng) - 1.0);
        }
    }
}

HeadBlocks HeadBlocks::find(const ParamSet& p)
{
    return {p.block_index("embedding"), p.block_index("head.w1"), p.block_index("head.b1"), p.block_index("head.w2"),
            p.block_index("head.b2")};
}

PointNetBlocks PointNetBlocks::find(const ParamSet& p)
{
    return {p.block_index("pointnet.w1"), p.block_index("pointnet.b1"), p.block_index("pointnet.w2"),
            p.block_index("pointnet.b2"), p.block_index("pointnet.w3"), p.block_index("pointnet.b3"),
            p.block_index("pointnet.w4"), p.block_index("pointnet.b4")};
}

double head_forward(const ParamSet& params, const HeadBlocks& hb, double interp, std::uint16_t source_id,
                    std::uint16_t target_id, const DropoutControl& dropout, HeadTrace& t)
{
    const auto embedding = params.matrix(hb.embedding);
    check_ids(source_id, target_id, static_cast<std::size_t>(embedding.rows()));
    const auto w1 = params.matrix(hb.w1);
    const auto b1 = params.vector(hb.b1);
    const auto w2 = params.matrix(hb.w2);
    const double b2 = params.block(hb.b2)[0];
    const Eigen::Index dim = embedding.cols();

    t.source_id = source_id;
    t.target_id = target_id;
    t.input.resize(1 + dim);
    t.input[0] = interp;
    for (Eigen::Index d = 0; d < dim; ++d)
        t.input[1 + d] = embedding(source_id, d) - embedding(target_id, d);

    t.pre.noalias() = w1 * t.input;
    t.pre += b1;
    t.act = t.pre.cwiseMax(0.0);

    const Eigen::Index hidden = t.pre.size();
    if (dropout.mode == Mode::train && dropout.fixed_mask != nullptr) {
        t.mask = *dropout.fixed_mask;
    } else if (dropout.mode == Mode::train && dropout.rate > 0.0) {
        if (dropout.rng == nullptr)
            throw DomainError("train-mode dropout needs a random stream");
        t.mask.resize(hidden);
        const double keep_scale = 1.0 / (1.0 - dropout.rate);
        for (Eigen::Index h = 0; h < hidden; ++h)
            t.mask[h] = uniform01(*dropout.rng) >= dropout.rate ? keep_scale : 0.0;
    } else {
        t.mask.setOnes(hidden);
    }

    t.pre_out = w2.row(0).dot(t.act.cwiseProduct(t.mask)) + b2;
    t.output = sigmoid(t.pre_out);
    return t.output;
}

double head_backward(const ParamSet& params, const HeadBlocks& hb, const HeadTrace& t, double d_output, ParamSet& grad)
{
    const auto w1 = params.matrix(hb.w1);
    const auto w2 = params.matrix(hb.w2);
    const double d_pre_out = d_output * t.output * (1.0 - t.output);

    const Eigen::VectorXd dropped = t.act.cwiseProduct(t.mask);
    grad.matrix(hb.w2).row(0) += d_pre_out * dropped.transpose();
    grad.block(hb.b2)[0] += d_pre_out;

    Eigen::VectorXd d_pre = (d_pre_out * w2.row(0).transpose()).cwiseProduct(t.mask);
    for (Eigen::Index h = 0; h < d_pre.size(); ++h)
        if (!(t.pre[h] > 0.0))
            d_pre[h] = 0.0;

    grad.matrix(hb.w1).noalias() += d_pre * t.input.transpose();
    grad.vector(hb.b1) += d_pre;

    const Eigen::VectorXd d_input = w1.transpose() * d_pre;
    if (t.source_id != t.target_id) {
        auto d_embedding = grad.matrix(hb.embedding);
        for (Eigen::Index d = 1; d < d_input.size(); ++d) {
            d_embedding(t.source_id, d - 1) += d_input[d];
            d_embedding(t.target_id, d - 1) -= d_input[d];
        }
    }
    return d_input[0];
}

Prediction forward(const ParamSet& params, std::span<const NeighborFeature> neighbors, std::uint16_t source_id,
                   std::uint16_t target_id, const DropoutControl& dropout, ForwardTrace& t)
{
    if (neighbors.empty())
        throw DomainError("forward needs at least one neighbor");
    const PointNetBlocks pb = PointNetBlocks::find(params);
    const HeadBlocks hb = HeadBlocks::find(params);
    check_ids(source_id, target_id, params.layout()[hb.embedding].rows);

    const auto w1 = params.matrix(pb.w1);
    const auto b1 = params.vector(pb.b1);
    const auto w2 = params.matrix(pb.w2);
    const auto b2 = params.vector(pb.b2);
    const auto w3 = params.matrix(pb.w3);
    const auto b3 = params.vector(pb.b3);
    const auto w4 = params.matrix(pb.w4);
    const double b4 = params.block(pb.b4)[0];

    const auto n = static_cast<Eigen::Index>(neighbors.size());
    t.input.resize(static_cast<Eigen::Index>(kPointFeatures), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& nb = neighbors[static_cast<std::size_t>(j)];
        t.input.col(j) << nb.dx, nb.dy, nb.dz, nb.intensity;
    }

    // Column-at-a-time products keep each neighbor's arithmetic independent
    // of its position, so the pooled features are order invariant bit for bit.
    t.pre1.resize(w1.rows(), n);
    t.pre2.resize(w2.rows(), n);
    t.act1.resize(w1.rows(), n);
    const Eigen::Index channels = w2.rows();
    t.pooled.setZero(channels);
    t.argmax.assign(static_cast<std::size_t>(channels), 0);
    Eigen::VectorXd act2(channels);
    for (Eigen::Index j = 0; j < n; ++j) {
        t.pre1.col(j).noalias() = w1 * t.input.col(j);
        t.pre1.col(j) += b1;
        t.act1.col(j) = t.pre1.col(j).cwiseMax(0.0);
        t.pre2.col(j).noalias() = w2 * t.act1.col(j);
        t.pre2.col(j) += b2;
        act2 = t.pre2.col(j).cwiseMax(0.0);
        for (Eigen::Index c = 0; c < channels; ++c) {
            if (j == 0 || act2[c] > t.pooled[c]) {
                t.pooled[c] = act2[c];
                t.argmax[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(j);
            }
        }
    }

    t.pre3.noalias() = w3 * t.pooled;
    t.pre3 += b3;
    t.act3 = t.pre3.cwiseMax(0.0);
    t.pre4 = w4.row(0).dot(t.act3) + b4;
    t.interp = sigmoid(t.pre4);

    const double h = head_forward(params, hb, t.interp, source_id, target_id, dropout, t.head);
    return {t.interp, h};
}

Prediction forward(const ParamSet& params, const Example& e, const DropoutControl& dropout, ForwardTrace& trace)
{
    return forward(params, e.neighbors, e.source_id, e.target_id, dropout, trace);
}

Prediction predict(const ParamSet& params, std::span<const NeighborFeature> neighbors, std::uint16_t source_id,
                   std::uint16_t target_id)
{
    ForwardTrace trace;
    return forward(params, neighbors, source_id, target_id, DropoutControl{}, trace);
}

void backward(const ParamSet& params, const ForwardTrace& t, double d_interp, double d_harmonized, ParamSet& grad)
{
    const PointNetBlocks pb = PointNetBlocks::find(params);
    const HeadBlocks hb = HeadBlocks::find(params);

    const double d_interp_total = d_interp + head_backward(params, hb, t.head, d_harmonized, grad);
    const double d_pre4 = d_interp_total * t.interp * (1.0 - t.interp);

    const auto w2 = params.matrix(pb.w2);
    const auto w3 = params.matrix(pb.w3);
    const auto w4 = params.matrix(pb.w4);

    grad.matrix(pb.w4).row(0) += d_pre4 * t.act3.transpose();
    grad.block(pb.b4)[0] += d_pre4;

    Eigen::VectorXd d_pre3 = d_pre4 * w4.row(0).transpose();
    for (Eigen::Index h = 0; h < d_pre3.size(); ++h)
        if (!(t.pre3[h] > 0.0))
            d_pre3[h] = 0.0;
    grad.matrix(pb.w3).noalias() += d_pre3 * t.pooled.transpose();
    grad.vector(pb.b3) += d_pre3;

    const Eigen::VectorXd d_pooled = w3.transpose() * d_pre3;

    // Max-pool routes each channel's gradient to its argmax neighbor only.
    Eigen::MatrixXd d_act1 = Eigen::MatrixXd::Zero(t.act1.rows(), t.act1.cols());
    auto gw2 = grad.matrix(pb.w2);
    auto gb2 = grad.vector(pb.b2);
    for (Eigen::Index c = 0; c < d_pooled.size(); ++c) {
        const Eigen::Index j = t.argmax[static_cast<std::size_t>(c)];
        if (!(t.pre2(c, j) > 0.0) || d_pooled[c] == 0.0)
            continue;
        const double d = d_pooled[c];
        gw2.row(c) += d * t.act1.col(j).transpose();
        gb2[c] += d;
        d_act1.col(j) += d * w2.row(c).transpose();
    }

    Eigen::MatrixXd d_pre1 = d_act1;
    for (Eigen::Index j = 0; j < d_pre1.cols(); ++j)
        for (Eigen::Index h = 0; h < d_pre1.rows(); ++h)
            if (!(t.pre1(h, j) > 0.0))
                d_pre1(h, j) = 0.0;
    grad.matrix(pb.w1).noalias() += d_pre1 * t.input.transpose();
    grad.vector(pb.b1) += d_pre1.rowwise().sum();
}

double rho(double prediction, double truth, LossKind kind)
{
    const double r = prediction - truth;
    return kind == LossKind::l1 ? std::abs(r) : r * r;
}

double rho_grad(double prediction, double truth, LossKind kind)
{
    const double r = prediction - truth;
    if (kind == LossKind::l2)
        return 2.0 * r;
    return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}

LossTerms loss(double interp, double harmonized, double gt_interp, double gt_harm, LossKind kind)
{
    LossTerms terms;
    terms.interp = rho(interp, gt_interp, kind);
    terms.harmonized = rho(harmonized, gt_harm, kind);
    terms.total = terms.interp + terms.harmonized;
    return terms;
}

} // namespace lidarharm
