#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "stochtop/errors.hpp"

namespace stochtop {

/// Scalar summary of the per-scenario compliance vector.
struct ComplianceStats {
    double mu = 0.0;    // Nmm
    double var = 0.0;   // Nmm^2, sample variance (1/(L-1))
    double sigma = 0.0; // Nmm
    double c_max = 0.0;
    double c_min = 0.0;
    int count = 0;
};

inline double mean(const Eigen::VectorXd& compliances) {
    if (compliances.size() < 1) throw ParameterError("mean: need at least one compliance");
    return compliances.mean();
}

inline ComplianceStats stats(const Eigen::VectorXd& compliances) {
    const int count = static_cast<int>(compliances.size());
    if (count < 2)
        throw ParameterError("stats: sample variance needs at least two compliances");
    ComplianceStats s;
    s.count = count;
    s.mu = compliances.mean();
    s.var = (compliances.array() - s.mu).square().sum() / (count - 1);
    s.sigma = std::sqrt(s.var);
    s.c_max = compliances.maxCoeff();
    s.c_min = compliances.minCoeff();
    return s;
}

enum class Stat { kMean, kVar, kStd };

/// Partial derivatives of the chosen statistic with respect to each C_i:
/// mean -> 1/L, var -> 2(C_i - mu)/(L-1), std -> (C_i - mu)/((L-1) sigma).
inline Eigen::VectorXd stat_partials(const Eigen::VectorXd& compliances, Stat which) {
    const int count = static_cast<int>(compliances.size());
    if (which == Stat::kMean) {
        if (count < 1) throw ParameterError("stat_partials: need at least one compliance");
        return Eigen::VectorXd::Constant(count, 1.0 / count);
    }
    if (count < 2) throw ParameterError("stat_partials: variance needs at least two compliances");
    const double mu = compliances.mean();
    Eigen::VectorXd centered = compliances.array() - mu;
    if (which == Stat::kVar) return 2.0 / (count - 1) * centered;
    const double sigma = std::sqrt(centered.squaredNorm() / (count - 1));
    if (sigma == 0.0)
        throw SingularGradientError("stat_partials: sigma = 0, std gradient undefined");
    return centered / ((count - 1) * sigma);
}

/// Value and dC-weights of gamma_mean * mu + m * gamma_std * sigma.
/// gamma factors default to 1 (exact mode); the corrected estimator passes
/// the ratios computed at the reference design.
struct WeightedObjective {
    double value = 0.0;
    Eigen::VectorXd dvalue_dC;
};

inline WeightedObjective mean_std_objective(const Eigen::VectorXd& compliances,
                                            double multiplier,
                                            double gamma_mean = 1.0,
                                            double gamma_std = 1.0) {
    if (!(multiplier >= 0.0))
        throw ParameterError("mean_std_objective: multiplier must be nonnegative");
    WeightedObjective out;
    const int count = static_cast<int>(compliances.size());
    if (multiplier == 0.0) {
        out.value = gamma_mean * mean(compliances);
        out.dvalue_dC = Eigen::VectorXd::Constant(count, gamma_mean / count);
        return out;
    }
    const ComplianceStats s = stats(compliances);
    out.value = gamma_mean * s.mu + multiplier * gamma_std * s.sigma;
    out.dvalue_dC = Eigen::VectorXd::Constant(count, gamma_mean / count) +
                    multiplier * gamma_std * stat_partials(compliances, Stat::kStd);
    return out;
}

} // namespace stochtop
