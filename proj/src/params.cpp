#include "lidarharm/params.hpp"

#include <algorithm>
#include <cmath>

#include "lidarharm/binary_io.hpp"
#include "lidarharm/error.hpp"

namespace lidarharm {

namespace {

constexpr char kMagic[4] = {'L', 'H', 'M', '1'};
constexpr std::uint16_t kVersion = 1;

std::string dims_text(const BlockSpec& b)
{
    return b.rank() == 1 ? "[" + std::to_string(b.rows) + "]"
                         : "[" + std::to_string(b.rows) + "x" + std::to_string(b.cols) + "]";
}

} // namespace

ParamSet::ParamSet(std::vector<BlockSpec> layout) : layout_(std::move(layout))
{
    std::size_t total = 0;
    for (const auto& b : layout_) {
        offsets_.push_back(total);
        total += b.size();
    }
    values_.assign(total, 0.0);
}

std::size_t ParamSet::block_index(const std::string& name) const
{
    for (std::size_t b = 0; b < layout_.size(); ++b)
        if (layout_[b].name == name)
            return b;
    throw Error("parameter block '" + name + "' not found");
}

MatrixMap ParamSet::matrix(std::size_t b)
{
    const auto cols = layout_[b].cols == 0 ? 1 : layout_[b].cols;
    return MatrixMap(values_.data() + offsets_[b], static_cast<Eigen::Index>(layout_[b].rows),
                     static_cast<Eigen::Index>(cols));
}

ConstMatrixMap ParamSet::matrix(std::size_t b) const
{
    const auto cols = layout_[b].cols == 0 ? 1 : layout_[b].cols;
    return ConstMatrixMap(values_.data() + offsets_[b], static_cast<Eigen::Index>(layout_[b].rows),
                          static_cast<Eigen::Index>(cols));
}

VectorMap ParamSet::vector(std::size_t b)
{
    return VectorMap(values_.data() + offsets_[b], static_cast<Eigen::Index>(layout_[b].size()));
}

ConstVectorMap ParamSet::vector(std::size_t b) const
{
    return ConstVectorMap(values_.data() + offsets_[b], static_cast<Eigen::Index>(layout_[b].size()));
}

bool ParamSet::all_finite() const
{
    for (double v : values_)
        if (!std::isfinite(v))
            return false;
    return true;
}

std::vector<char> encode_checkpoint(const ParamSet& params)
{
    binary::Writer w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.layout().size()));
    for (std::size_t b = 0; b < params.layout().size(); ++b) {
        const BlockSpec& spec = params.layout()[b];
        w.put<std::uint16_t>(static_cast<std::uint16_t>(spec.name.size()));
        w.put_bytes(spec.name);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(spec.rank()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.rows));
        if (spec.rank() == 2)
            w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.cols));
        for (double v : params.block(b))
            w.put<double>(v);
    }
    return std::move(w.data());
}

ParamSet decode_checkpoint(std::span<const char> bytes, const std::vector<BlockSpec>& expected)
{
    binary::Reader r(bytes, "checkpoint");
    if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != std::string_view(kMagic, 4))
        throw FormatError("checkpoint: bad magic at byte offset 0");
    r.get_bytes(4);
    const auto version = r.get<std::uint16_t>();
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();

    std::vector<BlockSpec> found;
    std::vector<std::vector<double>> data;
    for (std::uint32_t b = 0; b < count; ++b) {
        BlockSpec spec;
        const auto len = r.get<std::uint16_t>();
        spec.name = std::string(r.get_bytes(len));
        const auto rank = r.get<std::uint8_t>();
        if (rank != 1 && rank != 2)
            throw FormatError("checkpoint: block '" + spec.name + "' has unsupported rank " + std::to_string(rank));
        spec.rows = r.get<std::uint32_t>();
        if (rank == 2)
            spec.cols = r.get<std::uint32_t>();
        r.require(spec.size() * sizeof(double));
        std::vector<double> values(spec.size());
        for (auto& v : values)
            v = r.get<double>();
        found.push_back(std::move(spec));
        data.push_back(std::move(values));
    }
    if (r.remaining() != 0)
        throw FormatError("checkpoint: trailing bytes at byte offset " + std::to_string(r.offset()));

    std::string problems;
    for (const auto& want : expected) {
        auto it = std::find_if(found.begin(), found.end(), [&](const BlockSpec& f) { return f.name == want.name; });
        if (it == found.end())
            problems += " missing block '" + want.name + "';";
        else if (!(*it == want))
            problems += " block '" + want.name + "' has shape " + dims_text(*it) + ", expected " + dims_text(want) + ";";
    }
    for (const auto& f : found) {
        if (std::none_of(expected.begin(), expected.end(), [&](const BlockSpec& e) { return e.name == f.name; }))
            problems += " unexpected block '" + f.name + "';";
    }
    if (!problems.empty())
        throw FormatError("checkpoint: shape mismatch with current architecture:" + problems);

    ParamSet params(expected);
    for (std::size_t b = 0; b < expected.size(); ++b) {
        const auto it = std::find_if(found.begin(), found.end(),
                                     [&](const BlockSpec& f) { return f.name == expected[b].name; });
        const auto& values = data[static_cast<std::size_t>(it - found.begin())];
        std::copy(values.begin(), values.end(), params.block(b).begin());
    }
    return params;
}

void save_checkpoint(const ParamSet& params, const std::string& path)
{
    binary::write_file(path, encode_checkpoint(params));
}

ParamSet load_checkpoint(const std::string& path, const std::vector<BlockSpec>& expected)
{
    const auto bytes = binary::read_file(path);
    try {
        return decode_checkpoint(bytes, expected);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace lidarharm
