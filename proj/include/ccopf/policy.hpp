#pragma once

// Affine response policies: generator participation factors alpha, HVDC
// participation factors beta (applied +beta at the `from` terminal and
// -beta at the `to` terminal), and wind power ratios gamma.

#include <Eigen/Dense>
#include <stdexcept>

#include "ccopf/model.hpp"

namespace ccopf {

struct PolicySet {
    Eigen::VectorXd alpha;  // per generator
    Eigen::VectorXd beta;   // per HVDC line
    Eigen::VectorXd gamma;  // per wind farm

    static PolicySet zeros(const Network& net) {
        PolicySet p;
        p.alpha = Eigen::VectorXd::Zero(net.num_gens());
        p.beta = Eigen::VectorXd::Zero(net.num_hvdc());
        p.gamma = Eigen::VectorXd::Zero(net.num_wind());
        for (int w = 0; w < net.num_wind(); ++w) p.gamma[w] = net.wind_farms[w].power_ratio();
        return p;
    }

    /// Uniform alpha over participating generators, beta = 0.
    static PolicySet uniform(const Network& net) {
        PolicySet p = zeros(net);
        int np = 0;
        for (const auto& g : net.generators) np += g.can_participate ? 1 : 0;
        if (np == 0) throw std::invalid_argument("no participating generators");
        for (int g = 0; g < net.num_gens(); ++g)
            if (net.generators[g].can_participate) p.alpha[g] = 1.0 / np;
        return p;
    }

    void validate(const Network& net) const {
        if (alpha.size() != net.num_gens() || beta.size() != net.num_hvdc() ||
            gamma.size() != net.num_wind())
            throw std::invalid_argument("policy dimensions do not match the network");
        if (std::abs(alpha.sum() - 1.0) > 1e-9)
            throw std::invalid_argument("generator participation factors must sum to one");
        for (int g = 0; g < alpha.size(); ++g) {
            if (alpha[g] < -1e-12) throw std::invalid_argument("negative participation factor");
            if (!net.generators[g].can_participate && std::abs(alpha[g]) > 1e-12)
                throw std::invalid_argument("participation factor assigned to a non-participating generator");
        }
        if (!beta.allFinite() || !alpha.allFinite())
            throw std::invalid_argument("policy factors must be finite");
    }
};

}  // namespace ccopf
