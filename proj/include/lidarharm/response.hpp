#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lidarharm/pointcloud.hpp"

namespace lidarharm {

inline constexpr std::size_t kCurveSamples = 1024;

struct GammaCurve {
    double gamma = 1.0; ///< f(h) = h^gamma
};

/// Logistic rescaled so that f(0) = 0 and f(1) = 1.
struct SCurve {
    double steepness = 8.0;
    double midpoint = 0.5;
};

/// Monotone samples at uniformly spaced inputs j / (kCurveSamples - 1).
struct TabulatedCurve {
    std::string name;
    std::vector<double> samples;
};

/// Monotone sensor response f mapping true intensity H to recorded I = f(H).
class ResponseFunction {
public:
    using Variant = std::variant<GammaCurve, SCurve, TabulatedCurve>;

    ResponseFunction() : curve_(GammaCurve{1.0}) {}
    /// Throws DomainError when parameters violate the curve invariants.
    explicit ResponseFunction(Variant curve);

    static ResponseFunction identity() { return ResponseFunction(GammaCurve{1.0}); }

    /// f(h); h must lie in [0, 1].
    double apply(double h) const;

    /// Lowest h with f(h) = i; i must lie in [f(0), f(1)].
    double invert(double i) const;

    /// Short textual form, e.g. "gamma:2.2", "scurve:8:0.5", "table:<name>".
    std::string describe() const;

    bool is_identity() const;
    const Variant& curve() const { return curve_; }

private:
    double invert_bisection(double i) const;

    Variant curve_;
};

inline double apply(const ResponseFunction& f, double h) { return f.apply(h); }
inline double invert(const ResponseFunction& f, double i) { return f.invert(i); }

/// Parses "identity", "gamma:<g>", "scurve:<steepness>:<midpoint>" or
/// "table:<name>" (looked up in `tables`).
ResponseFunction parse_curve_spec(std::string_view spec, const std::vector<TabulatedCurve>& tables = {});

/// Reads the text curve format: records of `name <id>`, `samples 1024`, then
/// 1024 reals. Throws FormatError naming the curve on any violation.
std::vector<TabulatedCurve> load_curves(const std::string& path);
std::vector<TabulatedCurve> parse_curves(std::string_view text);
std::string format_curves(const std::vector<TabulatedCurve>& curves);

enum class ShiftForm { one_minus, floor };

/// Spatial brightness multiplier along normalized x.
struct ShiftParams {
    double h = 0.5;   ///< transition midpoint
    double v = 0.3;   ///< floor multiplier (floor form only)
    double l = 100.0; ///< steepness
    double s = 0.5;   ///< depth
    ShiftForm form = ShiftForm::one_minus;
};

void validate(const ShiftParams& p);

/// one-minus: m(x) = 1 - s / (1 + exp(l (x - h)))
/// floor:     m(x) = v + s * sigmoid(l (x - h))
double shift_multiplier(const ShiftParams& p, double x_norm);

struct XExtent {
    double min = 0.0;
    double max = 1.0;
};

inline double normalize_x(double x, const XExtent& extent)
{
    return std::clamp((x - extent.min) / (extent.max - extent.min), 0.0, 1.0);
}

/// Intensity of each point becomes f(m(x_norm) * H); everything else is kept.
Scan corrupt_scan(const Scan& scan, const ResponseFunction& f, const ShiftParams* shift, const XExtent& extent);

} // namespace lidarharm
