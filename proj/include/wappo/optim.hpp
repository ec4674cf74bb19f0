#pragma once

#include "wappo/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace wappo {

// Plain RMSProp (non-centered, no momentum) accumulator state, one
// square-average buffer per named parameter.
struct RmsPropState {
    std::map<std::string, std::vector<double>> square_avg;
    double rho = 0.99;
    double eps = 1e-8;
};

enum class StepDirection { Descent, Ascent };

// square_avg <- rho*square_avg + (1-rho)*g^2
// param      <- param -/+ lr * g / (sqrt(square_avg) + eps)
void rmsprop_step(ParamMap& params, const GradMap& grads, RmsPropState& state, double lr,
                  StepDirection dir = StepDirection::Descent);

// Projects every parameter entry into [-c, c]. Entries already inside are
// left bit-identical.
void clamp_params(ParamMap& params, double c);

double max_abs_param(const ParamMap& params);

}  // namespace wappo
