#pragma once

#include <functional>
#include <vector>

#include "farma/arma.hpp"

namespace farma {

/// Piecewise-linear ramp: RampUp is 0 below a, 1 above b; RampDown the
/// mirror image. Linear in between.
struct MembershipFunction {
    enum class Kind { RampUp, RampDown };
    Kind kind = Kind::RampUp;
    double a = 0.0;
    double b = 1.0;

    static MembershipFunction ramp_up(double a, double b);
    static MembershipFunction ramp_down(double a, double b);

    double operator()(double gamma) const;
};

inline double membership_eval(const MembershipFunction& mf, double gamma) { return mf(gamma); }

struct FuzzyRule {
    /// One membership per decision-variable component.
    std::vector<MembershipFunction> memberships;
    std::size_t controller_index = 0;
};

/// Product T-norm firing strength of every rule.
Vec rule_weights(const std::vector<FuzzyRule>& rules, const Vec& gamma);

/// Decision variable gamma = G(r, y).
using DecisionMap = std::function<Vec(const Vec& r, const Vec& y)>;

/// gamma = |r - y| (componentwise)
DecisionMap abs_tracking_error_decision();
/// gamma = |wrap_pi(y(index))|
DecisionMap abs_wrapped_angle_decision(Eigen::Index index);

/**
 * Takagi-Sugeno blend of ARMA controllers
 *
 *     u_r = sum_i w_i sat(phi_i theta_i) / sum_i w_i
 *
 * Every member controller advances once per call, whatever its weight.
 * If all weights vanish the plain mean of the member outputs is used.
 */
class FarmaController {
public:
    FarmaController(std::vector<ArmaController> controllers, std::vector<FuzzyRule> rules, DecisionMap gamma,
                    SaturationLimits limits);

    Vec step(const Vec& r, const Vec& y);

    const std::vector<ArmaController>& controllers() const { return controllers_; }
    const std::vector<FuzzyRule>& rules() const { return rules_; }
    const Vec& last_weights() const { return last_weights_; }
    const SaturationLimits& limits() const { return limits_; }
    void reset();

private:
    std::vector<ArmaController> controllers_;
    std::vector<FuzzyRule> rules_;
    DecisionMap gamma_;
    SaturationLimits limits_;
    Vec last_weights_;
};

/// Weighted average of member outputs with the zero-weight fallback.
Vec blend(const std::vector<Vec>& outputs, const Vec& weights);

}  // namespace farma
