#include "lidarharm/response.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "lidarharm/binary_io.hpp"
#include "lidarharm/error.hpp"

namespace lidarharm {

namespace {

double logistic(double t)
{
    if (t >= 0.0)
        return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double scurve_value(const SCurve& c, double h)
{
    const double lo = logistic(-c.steepness * c.midpoint);
    const double hi = logistic(c.steepness * (1.0 - c.midpoint));
    return std::clamp((logistic(c.steepness * (h - c.midpoint)) - lo) / (hi - lo), 0.0, 1.0);
}

double table_value(const TabulatedCurve& t, double h)
{
    const double pos = h * static_cast<double>(kCurveSamples - 1);
    const auto j = static_cast<std::size_t>(std::min(pos, static_cast<double>(kCurveSamples - 2)));
    const double frac = pos - static_cast<double>(j);
    return t.samples[j] + frac * (t.samples[j + 1] - t.samples[j]);
}

void check_table(const TabulatedCurve& t)
{
    if (t.samples.size() != kCurveSamples)
        throw FormatError("curve '" + t.name + "': expected " + std::to_string(kCurveSamples) + " samples, got " +
                          std::to_string(t.samples.size()));
    for (std::size_t j = 0; j < t.samples.size(); ++j) {
        const double v = t.samples[j];
        if (!(v >= 0.0 && v <= 1.0))
            throw FormatError("curve '" + t.name + "': sample " + std::to_string(j) + " outside [0,1]");
        if (j > 0 && v < t.samples[j - 1])
            throw FormatError("curve '" + t.name + "': curve not monotone at sample " + std::to_string(j));
    }
}

std::string format_double(double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

bool parse_double(std::string_view s, double& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace

ResponseFunction::ResponseFunction(Variant curve) : curve_(std::move(curve))
{
    if (const auto* g = std::get_if<GammaCurve>(&curve_)) {
        if (!(g->gamma > 0.0) || !std::isfinite(g->gamma))
            throw DomainError("gamma must be positive and finite");
    } else if (const auto* s = std::get_if<SCurve>(&curve_)) {
        if (!(s->steepness > 0.0) || !std::isfinite(s->steepness))
            throw DomainError("s-curve steepness must be positive");
        if (!std::isfinite(s->midpoint))
            throw DomainError("s-curve midpoint must be finite");
    } else {
        check_table(std::get<TabulatedCurve>(curve_));
    }
}

double ResponseFunction::apply(double h) const
{
    if (!(h >= 0.0 && h <= 1.0))
        throw DomainError("response input " + format_double(h) + " outside [0,1]");
    return std::visit(
        [h](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, GammaCurve>)
                return c.gamma == 1.0 ? h : std::pow(h, c.gamma);
            else if constexpr (std::is_same_v<T, SCurve>)
                return scurve_value(c, h);
            else
                return table_value(c, h);
        },
        curve_);
}

double ResponseFunction::invert(double i) const
{
    const double lo = apply(0.0);
    const double hi = apply(1.0);
    if (!(i >= lo && i <= hi))
        throw DomainError("response inverse input " + format_double(i) + " outside range [" + format_double(lo) +
                          ", " + format_double(hi) + "]");
    if (const auto* g = std::get_if<GammaCurve>(&curve_))
        return g->gamma == 1.0 ? i : std::pow(i, 1.0 / g->gamma);
    return invert_bisection(i);
}

double ResponseFunction::invert_bisection(double i) const
{
    // Invariant: f(lo) < i <= f(hi), so hi converges to the lowest preimage.
    double lo = 0.0;
    double hi = 1.0;
    if (apply(0.0) >= i)
        return 0.0;
    for (int it = 0; it < 64 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (apply(mid) >= i)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

std::string ResponseFunction::describe() const
{
    return std::visit(
        [](const auto& c) -> std::string {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, GammaCurve>)
                return c.gamma == 1.0 ? "identity" : "gamma:" + format_double(c.gamma);
            else if constexpr (std::is_same_v<T, SCurve>)
                return "scurve:" + format_double(c.steepness) + ":" + format_double(c.midpoint);
            else
                return "table:" + c.name;
        },
        curve_);
}

bool ResponseFunction::is_identity() const
{
    const auto* g = std::get_if<GammaCurve>(&curve_);
    return g && g->gamma == 1.0;
}

ResponseFunction parse_curve_spec(std::string_view spec, const std::vector<TabulatedCurve>& tables)
{
    auto fields = std::vector<std::string_view>{};
    std::size_t pos = 0;
    while (true) {
        const auto colon = spec.find(':', pos);
        fields.push_back(spec.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos));
        if (colon == std::string_view::npos)
            break;
        pos = colon + 1;
    }
    const auto bad = [&] { return DomainError("bad curve spec '" + std::string(spec) + "'"); };
    if (fields[0] == "identity" && fields.size() == 1)
        return ResponseFunction::identity();
    if (fields[0] == "gamma" && fields.size() == 2) {
        double g = 0.0;
        if (!parse_double(fields[1], g))
            throw bad();
        return ResponseFunction(GammaCurve{g});
    }
    if (fields[0] == "scurve" && fields.size() == 3) {
        SCurve c;
        if (!parse_double(fields[1], c.steepness) || !parse_double(fields[2], c.midpoint))
            throw bad();
        return ResponseFunction(c);
    }
    if (fields[0] == "table" && fields.size() == 2) {
        for (const auto& t : tables)
            if (t.name == fields[1])
                return ResponseFunction(t);
        throw DomainError("curve '" + std::string(fields[1]) + "' not found in loaded curve file");
    }
    throw bad();
}

std::vector<TabulatedCurve> parse_curves(std::string_view text)
{
    std::vector<TabulatedCurve> curves;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
        if (word != "name")
            throw FormatError("curve file: expected 'name', got '" + word + "'");
        TabulatedCurve curve;
        if (!(in >> curve.name))
            throw FormatError("curve file: missing curve name");
        std::string samples_kw;
        std::size_t count = 0;
        if (!(in >> samples_kw) || samples_kw != "samples" || !(in >> count))
            throw FormatError("curve '" + curve.name + "': expected 'samples <count>'");
        if (count != kCurveSamples)
            throw FormatError("curve '" + curve.name + "': expected " + std::to_string(kCurveSamples) +
                              " samples, got " + std::to_string(count));
        curve.samples.reserve(count);
        for (std::size_t j = 0; j < count; ++j) {
            std::string token;
            double v = 0.0;
            if (!(in >> token) || !parse_double(token, v))
                throw FormatError("curve '" + curve.name + "': expected " + std::to_string(kCurveSamples) +
                                  " samples, got " + std::to_string(j));
            curve.samples.push_back(v);
        }
        check_table(curve);
        curves.push_back(std::move(curve));
    }
    return curves;
}

std::vector<TabulatedCurve> load_curves(const std::string& path)
{
    const auto bytes = binary::read_file(path);
    return parse_curves(std::string_view(bytes.data(), bytes.size()));
}

std::string format_curves(const std::vector<TabulatedCurve>& curves)
{
    std::string out;
    for (const auto& c : curves) {
        out += "name " + c.name + "\nsamples " + std::to_string(c.samples.size()) + "\n";
        for (std::size_t j = 0; j < c.samples.size(); ++j) {
            out += format_double(c.samples[j]);
            out += (j + 1) % 8 == 0 ? '\n' : ' ';
        }
        out += "\n\n";
    }
    return out;
}

void validate(const ShiftParams& p)
{
    if (!(p.l > 0.0))
        throw DomainError("shift steepness l must be positive");
    if (!(p.s >= 0.0 && p.s <= 1.0))
        throw DomainError("shift depth s must lie in [0,1]");
    if (p.form == ShiftForm::floor && !(p.v > 0.0 && p.v + p.s <= 1.0))
        throw DomainError("floor shift needs 0 < v and v + s <= 1");
}

double shift_multiplier(const ShiftParams& p, double x_norm)
{
    const double t = p.l * (x_norm - p.h);
    if (p.form == ShiftForm::floor)
        return p.v + p.s * logistic(t);
    // s / (1 + e^t) == s * sigmoid(-t)
    return 1.0 - p.s * logistic(-t);
}

Scan corrupt_scan(const Scan& scan, const ResponseFunction& f, const ShiftParams* shift, const XExtent& extent)
{
    if (!(extent.max > extent.min))
        throw DomainError("x extent must have max > min");
    Scan out = scan;
    if (f.is_identity() && (shift == nullptr || shift->s == 0.0 && shift->form == ShiftForm::one_minus))
        return out;
    for (Point& p : out.points) {
        double h = p.intensity;
        if (shift != nullptr)
            h *= shift_multiplier(*shift, normalize_x(p.x, extent));
        p.intensity = static_cast<float>(f.apply(std::clamp(h, 0.0, 1.0)));
    }
    return out;
}

} // namespace lidarharm
