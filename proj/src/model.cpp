#include "qmfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qmfg/particles.hpp"
#include "qmfg/quantile.hpp"

namespace qmfg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// MarkLaw

MarkLaw MarkLaw::gaussian(double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("mark gaussian: sigma must be > 0");
    MarkLaw m;
    m.kind = Kind::gaussian;
    m.mu = mu;
    m.sigma = sigma;
    return m;
}

MarkLaw MarkLaw::uniform(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("mark uniform: need hi > lo");
    MarkLaw m;
    m.kind = Kind::uniform;
    m.lo_ = lo;
    m.hi_ = hi;
    return m;
}

MarkLaw MarkLaw::point(double theta0) {
    MarkLaw m;
    m.kind = Kind::point;
    m.mu = theta0;
    return m;
}

MarkLaw MarkLaw::custom(std::function<double(double)> density, double lo, double hi,
                        bool symmetric) {
    MarkLaw m;
    m.kind = Kind::custom;
    m.custom_density = std::move(density);
    m.lo_ = lo;
    m.hi_ = hi;
    m.custom_symmetric = symmetric;
    return m;
}

double MarkLaw::lo() const {
    switch (kind) {
        case Kind::gaussian: return mu - 8.0 * sigma;
        case Kind::point: return mu;
        default: return lo_;
    }
}

double MarkLaw::hi() const {
    switch (kind) {
        case Kind::gaussian: return mu + 8.0 * sigma;
        case Kind::point: return mu;
        default: return hi_;
    }
}

bool MarkLaw::symmetric() const {
    switch (kind) {
        case Kind::gaussian: return mu == 0.0;
        case Kind::uniform: return lo_ == -hi_;
        case Kind::point: return mu == 0.0;
        case Kind::custom: return custom_symmetric;
    }
    return false;
}

double MarkLaw::density(double theta) const {
    switch (kind) {
        case Kind::gaussian: {
            const double z = (theta - mu) / sigma;
            return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
        }
        case Kind::uniform:
            return (theta >= lo_ && theta <= hi_) ? 1.0 / (hi_ - lo_) : 0.0;
        case Kind::point:
            throw std::logic_error("mark point law has no density");
        case Kind::custom:
            return custom_density(theta);
    }
    return 0.0;
}

double MarkLaw::icdf(double u) const {
    switch (kind) {
        case Kind::gaussian: return mu + sigma * inv_norm_cdf(u);
        case Kind::uniform: return lo_ + u * (hi_ - lo_);
        case Kind::point: return mu;
        case Kind::custom:
            throw std::logic_error("mark custom law has no sampler");
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// LevySpec

LevySpec::LevySpec(double intensity_, MarkLaw mark_, double delta_max_)
    : intensity(intensity_), mark(std::move(mark_)), delta_max(delta_max_) {
    if (intensity < 0.0) throw std::invalid_argument("levy: intensity must be >= 0");
    symmetric = mark.symmetric();
    if (!mark.is_point()) {
        rule = gauss_legendre(256, mark.lo(), mark.hi());
        for (int i = 0; i < rule.nodes.size(); ++i) rule.weights(i) *= mark.density(rule.nodes(i));
    }
    exp_moment_bound =
        mean_of([this](double th) { return std::exp(delta_max * std::abs(th)); });
}

double LevySpec::mean_of(const std::function<double(double)>& fn) const {
    if (mark.is_point()) return fn(mark.mu);
    double acc = 0.0;
    for (int i = 0; i < rule.nodes.size(); ++i) acc += rule.weights(i) * fn(rule.nodes(i));
    return acc;
}

double LevySpec::density_mass() const {
    if (mark.is_point()) return 1.0;
    return rule.weights.sum();
}

// ---------------------------------------------------------------------------
// Coefficients

namespace {
constexpr double kFdScale = 1e-5;

double fd_step(double s) { return kFdScale * (1.0 + std::abs(s)); }
}  // namespace

double CoefficientSet::drift_deriv(double t, double s, double q, double a) const {
    if (drift_s) return drift_s(t, s, q, a);
    const double h = fd_step(s);
    return (drift(t, s + h, q, a) - drift(t, s - h, q, a)) / (2.0 * h);
}

double CoefficientSet::diff_idio_deriv(double t, double s, double q, double a) const {
    if (diff_idio_s) return diff_idio_s(t, s, q, a);
    const double h = fd_step(s);
    return (diff_idio(t, s + h, q, a) - diff_idio(t, s - h, q, a)) / (2.0 * h);
}

double CoefficientSet::diff_common_deriv(double t, double s, double q, double a) const {
    if (diff_common_s) return diff_common_s(t, s, q, a);
    const double h = fd_step(s);
    return (diff_common(t, s + h, q, a) - diff_common(t, s - h, q, a)) / (2.0 * h);
}

double CoefficientSet::jump_gamma_deriv(double t, double s, double q, double a,
                                        double theta) const {
    if (jump_gamma_s) return jump_gamma_s(t, s, q, a, theta);
    const double h = fd_step(s);
    return (jump_gamma(t, s + h, q, a, theta) - jump_gamma(t, s - h, q, a, theta)) / (2.0 * h);
}

Coeff coeff_const(double v) {
    return [v](double, double, double, double) { return v; };
}

Coeff coeff_zero() { return coeff_const(0.0); }

Coeff drift_tanh(double delta) {
    return [delta](double, double s, double, double) { return delta * std::tanh(delta * s); };
}

Coeff drift_ou(double alpha) {
    return [alpha](double, double s, double q, double a) {
        return alpha * (q - s) + std::max(a - q, 0.0);
    };
}

JumpCoeff gamma_zero() {
    return [](double, double, double, double, double) { return 0.0; };
}

JumpCoeff gamma_mark() {
    return [](double, double, double, double, double theta) { return theta; };
}

ControlPolicy zero_policy() { return ControlPolicy{}; }

// ---------------------------------------------------------------------------
// InitialLaw

InitialLaw InitialLaw::point(double v) {
    InitialLaw l;
    l.kind = Kind::point;
    l.value = v;
    return l;
}

InitialLaw InitialLaw::gaussian(double mu, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("initial law: sigma must be >= 0");
    InitialLaw l;
    l.kind = Kind::gaussian;
    l.mu = mu;
    l.sigma = sigma;
    return l;
}

InitialLaw InitialLaw::empirical(std::vector<double> vs) {
    if (vs.empty()) throw std::invalid_argument("initial law: empirical list is empty");
    InitialLaw l;
    l.kind = Kind::empirical;
    l.values = std::move(vs);
    return l;
}

double InitialLaw::support_lo() const {
    switch (kind) {
        case Kind::point: return value;
        case Kind::gaussian: return mu - 6.0 * sigma;
        case Kind::empirical: return *std::min_element(values.begin(), values.end());
    }
    return 0.0;
}

double InitialLaw::support_hi() const {
    switch (kind) {
        case Kind::point: return value;
        case Kind::gaussian: return mu + 6.0 * sigma;
        case Kind::empirical: return *std::max_element(values.begin(), values.end());
    }
    return 0.0;
}

double InitialLaw::mean() const {
    switch (kind) {
        case Kind::point: return value;
        case Kind::gaussian: return mu;
        case Kind::empirical: {
            double s = 0.0;
            for (double v : values) s += v;
            return s / double(values.size());
        }
    }
    return 0.0;
}

double InitialLaw::stddev() const {
    switch (kind) {
        case Kind::point: return 0.0;
        case Kind::gaussian: return sigma;
        case Kind::empirical: {
            const double m = mean();
            double s = 0.0;
            for (double v : values) s += (v - m) * (v - m);
            return values.size() > 1 ? std::sqrt(s / double(values.size() - 1)) : 0.0;
        }
    }
    return 0.0;
}

double InitialLaw::quantile(double f) const {
    switch (kind) {
        case Kind::point: return value;
        case Kind::gaussian: return gaussian_quantile(mu, sigma, f);
        case Kind::empirical: {
            Eigen::ArrayXd arr = Eigen::Map<const Eigen::ArrayXd>(values.data(), values.size());
            return empirical_quantile(arr, f);
        }
    }
    return 0.0;
}

double InitialLaw::sample(CounterRng& rng) const {
    switch (kind) {
        case Kind::point: return value;
        case Kind::gaussian: return mu + sigma * rng.normal();
        case Kind::empirical: {
            const std::size_t i =
                std::min(values.size() - 1, std::size_t(rng.uniform() * double(values.size())));
            return values[i];
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::mentions(const std::string& needle) const {
    for (const auto& v : violations)
        if (v.message.find(needle) != std::string::npos || v.field.find(needle) != std::string::npos)
            return true;
    return false;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    if (violations.empty()) {
        os << "scenario valid\n";
    } else {
        for (const auto& v : violations) os << "violation [" << v.field << "]: " << v.message << "\n";
    }
    for (const auto& s : info) os << "info: " << s << "\n";
    return os.str();
}

double derivative_check(const CoefficientSet& c, const std::vector<std::array<double, 4>>& grid) {
    if (!c.has_analytic())
        throw std::invalid_argument("derivative_check: no analytic derivatives supplied");
    static const double theta_probes[] = {-1.0, 0.0, 1.0};

    auto point_str = [](double t, double s, double q, double a) {
        std::ostringstream os;
        os << "(t=" << t << ", s=" << s << ", q=" << q << ", a=" << a << ")";
        return os.str();
    };

    double worst = 0.0;
    for (const auto& [t, s, q, a] : grid) {
        const double h = fd_step(s);
        struct Pair {
            const char* name;
            double analytic;
            double lo, hi;
        };
        std::vector<Pair> pairs;
        auto probe = [&](const char* name, const Coeff& fn, const Coeff& dfn) {
            if (!fn || !dfn) return;
            if (!std::isfinite(fn(t, s, q, a)))
                throw std::runtime_error(std::string("derivative_check: non-finite ") + name +
                                         " at " + point_str(t, s, q, a));
            pairs.push_back({name, dfn(t, s, q, a), fn(t, s - h, q, a), fn(t, s + h, q, a)});
        };
        probe("drift", c.drift, c.drift_s);
        probe("diff_idio", c.diff_idio, c.diff_idio_s);
        probe("diff_common", c.diff_common, c.diff_common_s);
        if (c.jump_gamma && c.jump_gamma_s) {
            for (double th : theta_probes)
                pairs.push_back({"jump_gamma", c.jump_gamma_s(t, s, q, a, th),
                                 c.jump_gamma(t, s - h, q, a, th), c.jump_gamma(t, s + h, q, a, th)});
        }
        for (const auto& p : pairs) {
            if (!std::isfinite(p.analytic) || !std::isfinite(p.lo) || !std::isfinite(p.hi))
                throw std::runtime_error(std::string("derivative_check: non-finite ") + p.name +
                                         " at " + point_str(t, s, q, a));
            const double central = (p.hi - p.lo) / (2.0 * h);
            const double err = std::abs(p.analytic - central) / (1.0 + std::abs(p.analytic));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

ValidationReport validate_scenario(const Scenario& s) {
    ValidationReport rep;
    auto violate = [&rep](const std::string& field, const std::string& msg) {
        rep.violations.push_back({field, msg});
    };

    if (!(s.f > 0.0 && s.f < 1.0)) violate("f", "f must lie strictly in (0,1)");
    if (!(s.horizon > 0.0)) violate("horizon", "horizon must be > 0");
    if (!(s.dt > 0.0)) violate("dt", "dt must be > 0");
    if (s.horizon > 0.0 && s.dt > 0.0) {
        const double k = std::round(s.horizon / s.dt);
        if (std::abs(s.horizon - k * s.dt) > 1e-12 * std::max(1.0, s.horizon))
            violate("dt", "dt must divide horizon within 1e-12");
    }
    if (s.n_particles < 2) violate("n_particles", "n_particles must be >= 2");

    try {
        s.state_grid.require_valid();
        if (s.state_grid.n < 64) violate("state_grid", "state_grid needs at least 64 cells");
        const double margin_lo = s.initial_law.support_lo();
        const double margin_hi = s.initial_law.support_hi();
        if (margin_lo < s.state_grid.lo || margin_hi > s.state_grid.hi)
            violate("state_grid", "state_grid must cover the initial law support plus 6 sigma");
    } catch (const std::exception& e) {
        violate("state_grid", e.what());
    }

    if (s.levy.intensity < 0.0) violate("levy", "intensity must be >= 0");
    if (s.levy.intensity > 0.0 && !s.levy.mark.is_point()) {
        const double mass = s.levy.density_mass();
        if (std::abs(mass - 1.0) > 1e-6)
            violate("levy", "mark density must integrate to 1 within 1e-6 (got " +
                                fmt17(mass) + ")");
    }
    if (!std::isfinite(s.levy.exp_moment_bound))
        violate("levy", "exponential moment bound is not finite at delta_max");

    if (!s.coeffs.drift || !s.coeffs.diff_idio || !s.coeffs.diff_common || !s.coeffs.jump_gamma) {
        violate("coeffs", "all four coefficient functions must be set");
        return rep;
    }

    // Probe grid over the declared state box.
    std::vector<double> ts = {0.0, 0.5 * s.horizon, s.horizon};
    std::vector<double> ss, qs;
    for (int i = 0; i < 9; ++i)
        ss.push_back(s.state_grid.lo + (s.state_grid.hi - s.state_grid.lo) * i / 8.0);
    for (int i = 0; i < 5; ++i)
        qs.push_back(s.state_grid.lo + (s.state_grid.hi - s.state_grid.lo) * i / 4.0);

    bool sigma_positive = true;
    bool all_finite = true;
    std::vector<std::array<double, 4>> grid;
    for (double t : ts)
        for (double x : ss)
            for (double q : qs) {
                for (double a : {s.control_policy.eval(t, x, q), 0.0}) {
                    grid.push_back({t, x, q, a});
                    const double b = s.coeffs.drift(t, x, q, a);
                    const double sg = s.coeffs.diff_idio(t, x, q, a);
                    const double so = s.coeffs.diff_common(t, x, q, a);
                    double g = 0.0;
                    if (s.levy.intensity > 0.0)
                        g = s.coeffs.jump_gamma(t, x, q, a, 0.5 * (s.levy.mark.lo() + s.levy.mark.hi()));
                    if (!(sg > 0.0)) sigma_positive = false;
                    if (!std::isfinite(b) || !std::isfinite(sg) || !std::isfinite(so) ||
                        !std::isfinite(g))
                        all_finite = false;
                }
            }
    if (!sigma_positive) violate("diff_idio", "diff_idio must be positive on the state box");
    if (!all_finite) violate("coeffs", "coefficient evaluation is non-finite on the state box");

    if (s.coeffs.has_analytic() && all_finite) {
        try {
            const double err = derivative_check(s.coeffs, grid);
            if (err > 1e-5)
                violate("coeffs", "analytic derivatives disagree with central differences "
                                  "(max relative error " + fmt17(err) + ")");
        } catch (const std::exception& e) {
            violate("coeffs", e.what());
        }
    }

    // Empirical Lipschitz probe for the drift.
    if (all_finite) {
        double max_slope = 0.0;
        const int probes = 201;
        const double dx = (s.state_grid.hi - s.state_grid.lo) / (probes - 1);
        for (double t : ts)
            for (double q : {qs.front(), qs[qs.size() / 2], qs.back()}) {
                const double a = s.control_policy.eval(t, s.state_grid.lo, q);
                double prev = s.coeffs.drift(t, s.state_grid.lo, q, a);
                for (int i = 1; i < probes; ++i) {
                    const double x = s.state_grid.lo + i * dx;
                    const double cur = s.coeffs.drift(t, x, q, a);
                    max_slope = std::max(max_slope, std::abs(cur - prev) / dx);
                    prev = cur;
                }
            }
        if (!std::isfinite(max_slope)) {
            violate("coeffs", "drift slope probe is non-finite");
        } else {
            rep.info.push_back("drift empirical Lipschitz bound: " + fmt17(max_slope));
        }
    }

    return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

MarkLaw mark_from_json(const json& j) {
    const std::string name = j.at("name").get<std::string>();
    if (name == "gaussian") return MarkLaw::gaussian(j.value("mu", 0.0), j.at("sigma").get<double>());
    if (name == "uniform") return MarkLaw::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (name == "point") return MarkLaw::point(j.at("theta0").get<double>());
    throw std::invalid_argument("unknown mark law: " + name);
}

void coeff_from_json(const json& j, const std::string& slot, CoefficientSet& c) {
    const std::string name = j.at("name").get<std::string>();
    Coeff fn, dfn;
    if (name == "zero") {
        fn = coeff_zero();
        dfn = coeff_zero();
    } else if (name == "const") {
        fn = coeff_const(j.at("value").get<double>());
        dfn = coeff_zero();
    } else if (name == "tanh") {
        const double delta = j.at("delta").get<double>();
        fn = drift_tanh(delta);
        dfn = [delta](double, double s, double, double) {
            const double th = std::tanh(delta * s);
            return delta * delta * (1.0 - th * th);
        };
    } else if (name == "ou") {
        const double alpha = j.at("alpha").get<double>();
        fn = drift_ou(alpha);
        dfn = coeff_const(-alpha);
    } else {
        throw std::invalid_argument("unknown coefficient '" + name + "' for " + slot);
    }
    if (slot == "drift") {
        c.drift = fn;
        c.drift_s = dfn;
    } else if (slot == "diff_idio") {
        c.diff_idio = fn;
        c.diff_idio_s = dfn;
    } else {
        c.diff_common = fn;
        c.diff_common_s = dfn;
    }
}

void gamma_from_json(const json& j, CoefficientSet& c) {
    const std::string name = j.at("name").get<std::string>();
    if (name == "zero") {
        c.jump_gamma = gamma_zero();
        c.jump_gamma_s = [](double, double, double, double, double) { return 0.0; };
    } else if (name == "mark") {
        c.jump_gamma = gamma_mark();
        c.jump_gamma_s = [](double, double, double, double, double) { return 0.0; };
    } else {
        throw std::invalid_argument("unknown jump_gamma: " + name);
    }
}

InitialLaw initial_from_json(const json& j) {
    const std::string name = j.at("name").get<std::string>();
    if (name == "point") return InitialLaw::point(j.at("value").get<double>());
    if (name == "gaussian")
        return InitialLaw::gaussian(j.at("mu").get<double>(), j.at("sigma").get<double>());
    if (name == "empirical") return InitialLaw::empirical(j.at("values").get<std::vector<double>>());
    throw std::invalid_argument("unknown initial law: " + name);
}

ControlPolicy policy_from_json(const json& j) {
    const std::string name = j.at("name").get<std::string>();
    ControlPolicy p;
    p.name = name;
    if (name == "zero") {
        p.eval = [](double, double, double) { return 0.0; };
    } else if (name == "quantile_tracking") {
        p.eval = [](double, double, double q) { return q; };
    } else {
        throw std::invalid_argument("unknown control policy: " + name);
    }
    return p;
}

}  // namespace

Scenario scenario_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    Scenario s;

    const json& jc = j.at("coeffs");
    coeff_from_json(jc.at("drift"), "drift", s.coeffs);
    coeff_from_json(jc.at("diff_idio"), "diff_idio", s.coeffs);
    coeff_from_json(jc.at("diff_common"), "diff_common", s.coeffs);
    gamma_from_json(jc.at("jump_gamma"), s.coeffs);

    const json& jl = j.at("levy");
    s.levy = LevySpec(jl.at("intensity").get<double>(), mark_from_json(jl.at("mark")),
                      jl.value("delta_max", 2.0));

    s.f = j.at("f").get<double>();
    s.horizon = j.at("horizon").get<double>();
    s.dt = j.at("dt").get<double>();
    s.n_particles = j.at("n_particles").get<std::int64_t>();
    s.initial_law = initial_from_json(j.at("initial_law"));
    const json& jg = j.at("state_grid");
    s.state_grid = GridSpec{jg.at("lo").get<double>(), jg.at("hi").get<double>(),
                            jg.at("n_cells").get<int>()};
    s.seed = j.at("seed").get<std::uint64_t>();
    s.control_policy = policy_from_json(j.at("control_policy"));

    s.desc = j.dump(2);
    return s;
}

std::string scenario_to_json(const Scenario& s) {
    if (s.desc.empty())
        throw std::logic_error("scenario was not built from JSON; no canonical form available");
    return json::parse(s.desc).dump(2);
}

}  // namespace qmfg
