#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lidarharm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Named tensor block; rank 1 when cols == 0.
struct BlockSpec {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t rank() const { return cols == 0 ? 1 : 2; }
    std::size_t size() const { return cols == 0 ? rows : rows * cols; }
    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// Named blocks stored contiguously in one flat vector (row-major inside
/// each block), so optimizers and gradient buffers work on plain spans.
class ParamSet {
public:
    ParamSet() = default;
    explicit ParamSet(std::vector<BlockSpec> layout);

    const std::vector<BlockSpec>& layout() const { return layout_; }
    std::size_t size() const { return values_.size(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::size_t block_index(const std::string& name) const;
    std::size_t offset(std::size_t block) const { return offsets_[block]; }
    std::span<double> block(std::size_t b) { return {values_.data() + offsets_[b], layout_[b].size()}; }
    std::span<const double> block(std::size_t b) const { return {values_.data() + offsets_[b], layout_[b].size()}; }

    MatrixMap matrix(std::size_t b);
    ConstMatrixMap matrix(std::size_t b) const;
    VectorMap vector(std::size_t b);
    ConstVectorMap vector(std::size_t b) const;

    bool all_finite() const;
    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    std::vector<BlockSpec> layout_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
};

/// Checkpoint layout: "LHM1", u16 version, u32 block count; per block: u16
/// name length + UTF-8 name, u8 rank, rank x u32 dims, row-major f64 values.
std::vector<char> encode_checkpoint(const ParamSet& params);

/// Decodes and checks every block against `expected`; a mismatch throws
/// FormatError naming the offending block(s).
ParamSet decode_checkpoint(std::span<const char> bytes, const std::vector<BlockSpec>& expected);

void save_checkpoint(const ParamSet& params, const std::string& path);
ParamSet load_checkpoint(const std::string& path, const std::vector<BlockSpec>& expected);

} // namespace lidarharm
