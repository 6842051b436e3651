#include "farma/fuzzy.hpp"

#include <cmath>
#include <stdexcept>

namespace farma {

MembershipFunction MembershipFunction::ramp_up(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("membership: need a < b");
    return {Kind::RampUp, a, b};
}

MembershipFunction MembershipFunction::ramp_down(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("membership: need a < b");
    return {Kind::RampDown, a, b};
}

double MembershipFunction::operator()(double gamma) const {
    if (kind == Kind::RampUp) {
        if (gamma < a) return 0.0;
        if (gamma > b) return 1.0;
        return (gamma - a) / (b - a);
    }
    if (gamma < a) return 1.0;
    if (gamma > b) return 0.0;
    return (b - gamma) / (b - a);
}

Vec rule_weights(const std::vector<FuzzyRule>& rules, const Vec& gamma) {
    Vec w(static_cast<Eigen::Index>(rules.size()));
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto& mfs = rules[i].memberships;
        if (static_cast<Eigen::Index>(mfs.size()) != gamma.size())
            throw std::invalid_argument("rule_weights: rule arity does not match decision variable");
        double prod = 1.0;
        for (std::size_t j = 0; j < mfs.size(); ++j) prod *= mfs[j](gamma(static_cast<Eigen::Index>(j)));
        w(static_cast<Eigen::Index>(i)) = prod;
    }
    return w;
}

DecisionMap abs_tracking_error_decision() {
    return [](const Vec& r, const Vec& y) -> Vec { return (r - y).cwiseAbs(); };
}

DecisionMap abs_wrapped_angle_decision(Eigen::Index index) {
    return [index](const Vec&, const Vec& y) -> Vec { return Vec::Constant(1, std::abs(wrap_pi(y(index)))); };
}

Vec blend(const std::vector<Vec>& outputs, const Vec& weights) {
    if (outputs.empty()) throw std::invalid_argument("blend: no outputs");
    const double total = weights.sum();
    Vec acc = Vec::Zero(outputs.front().size());
    if (total > 0.0) {
        for (std::size_t i = 0; i < outputs.size(); ++i) acc += weights(static_cast<Eigen::Index>(i)) * outputs[i];
        return acc / total;
    }
    for (const auto& o : outputs) acc += o;
    return acc / static_cast<double>(outputs.size());
}

FarmaController::FarmaController(std::vector<ArmaController> controllers, std::vector<FuzzyRule> rules,
                                 DecisionMap gamma, SaturationLimits limits)
    : controllers_(std::move(controllers)), rules_(std::move(rules)), gamma_(std::move(gamma)), limits_(std::move(limits)) {
    if (controllers_.empty()) throw std::invalid_argument("FarmaController: need at least one controller");
    if (rules_.size() != controllers_.size()) throw std::invalid_argument("FarmaController: need one rule per controller");
    for (const auto& rule : rules_) {
        if (rule.controller_index >= controllers_.size())
            throw std::invalid_argument("FarmaController: rule references a missing controller");
        if (rule.memberships.size() != rules_.front().memberships.size())
            throw std::invalid_argument("FarmaController: rules disagree on decision-variable size");
    }
}

void FarmaController::reset() {
    for (auto& c : controllers_) c.reset();
}

Vec FarmaController::step(const Vec& r, const Vec& y) {
    std::vector<Vec> member(controllers_.size());
    for (std::size_t i = 0; i < controllers_.size(); ++i)
        member[i] = saturate(controllers_[i].step(r, y), controllers_[i].limits());

    last_weights_ = rule_weights(rules_, gamma_(r, y));
    const double total = last_weights_.sum();
    Vec u = Vec::Zero(member.front().size());
    if (total > 0.0) {
        for (std::size_t i = 0; i < rules_.size(); ++i)
            u += last_weights_(static_cast<Eigen::Index>(i)) * member[rules_[i].controller_index];
        return u / total;
    }
    for (const auto& rule : rules_) u += member[rule.controller_index];
    return u / static_cast<double>(rules_.size());
}

}  // namespace farma
