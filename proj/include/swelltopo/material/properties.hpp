#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swelltopo/error.hpp"

namespace swelltopo {

/// Universal gas constant, J/(mol K).
inline constexpr double kGasConstant = 8.314;

/// Solvent bath. Chemical potentials in J/mol.
struct SolventEnvironment {
    std::string name = "water";
    double mu_dry = -1.0e5;
    double mu_wet = -100.0;
    double mu0 = 0.0;
    double molar_volume = 1.8e-5; // m^3/mol
    double temperature = 298.0;   // K

    double rt() const { return kGasConstant * temperature; }

    /// Returns every violated invariant; empty when valid.
    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(mu_dry <= mu_wet)) v.push_back("solvent '" + name + "': mu_dry must not exceed mu_wet");
        if (!(mu_wet <= mu0)) v.push_back("solvent '" + name + "': mu_wet must not exceed mu0");
        if (!(temperature > 0)) v.push_back("solvent '" + name + "': temperature must be positive");
        if (!(molar_volume > 0)) v.push_back("solvent '" + name + "': molar volume must be positive");
        return v;
    }

    bool operator==(const SolventEnvironment&) const = default;
};

struct PhaseProperties {
    std::string name;
    double shear_modulus = 1.0e6;                   // Pa
    std::map<std::string, double> chi_per_solvent;  // solvent name -> Flory-Huggins chi
    double fiber_stiffness = 0.0;                   // Pa, zero for non-fibrous phases

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(shear_modulus > 0)) v.push_back("phase '" + name + "': shear modulus must be positive");
        for (const auto& [solvent, chi] : chi_per_solvent)
            if (!(chi > 0)) v.push_back("phase '" + name + "': chi for solvent '" + solvent + "' must be positive");
        if (!(fiber_stiffness >= 0)) v.push_back("phase '" + name + "': fiber stiffness must be non-negative");
        return v;
    }

    bool operator==(const PhaseProperties&) const = default;
};

/// Per-phase property columns for one solvent, ordered like the table.
struct PhaseColumns {
    std::vector<double> shear_modulus;
    std::vector<double> chi;
    std::vector<double> fiber_stiffness;

    std::size_t size() const { return shear_modulus.size(); }
};

class MaterialTable {
public:
    MaterialTable() = default;
    explicit MaterialTable(std::vector<PhaseProperties> phases) : phases_(std::move(phases)) {}

    std::size_t size() const { return phases_.size(); }
    const std::vector<PhaseProperties>& phases() const { return phases_; }
    const PhaseProperties& phase(std::size_t i) const { return phases_.at(i); }

    int index_of(std::string_view name) const {
        for (std::size_t i = 0; i < phases_.size(); ++i)
            if (phases_[i].name == name) return static_cast<int>(i);
        return -1;
    }

    double chi(std::size_t phase, std::string_view solvent) const {
        const auto& m = phases_.at(phase).chi_per_solvent;
        auto it = m.find(std::string(solvent));
        if (it == m.end())
            throw ConfigError("phase '" + phases_[phase].name + "' has no chi for solvent '" + std::string(solvent) + "'");
        return it->second;
    }

    PhaseColumns columns(std::string_view solvent) const {
        PhaseColumns c;
        for (std::size_t i = 0; i < phases_.size(); ++i) {
            c.shear_modulus.push_back(phases_[i].shear_modulus);
            c.chi.push_back(chi(i, solvent));
            c.fiber_stiffness.push_back(phases_[i].fiber_stiffness);
        }
        return c;
    }

    double max_shear_modulus() const {
        double g = 0;
        for (const auto& p : phases_) g = std::max(g, p.shear_modulus);
        return g;
    }

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (phases_.empty()) v.push_back("material table has no phases");
        for (const auto& p : phases_) {
            auto pv = p.violations();
            v.insert(v.end(), pv.begin(), pv.end());
        }
        return v;
    }

    bool operator==(const MaterialTable&) const = default;

private:
    std::vector<PhaseProperties> phases_;
};

/// SIMP exponents: p for the shear modulus (and fiber stiffness), q for chi.
struct InterpolationParams {
    double p = 3.0;
    double q = 1.0;
};

struct EffectivePointProperties {
    double shear_modulus = 0;
    double chi = 0;
    double fiber_stiffness = 0;
    double fiber_angle = 0; // radians
};

inline constexpr double kPartitionTolerance = 1e-9;

inline void check_pseudodensity(std::span<const double> rho) {
    double sum = 0;
    for (double r : rho) {
        if (!(r >= 0.0) || r > 1.0 + kPartitionTolerance)
            throw InvalidDesignError("pseudodensity component outside [0, 1]");
        sum += r;
    }
    if (std::abs(sum - 1.0) > kPartitionTolerance)
        throw InvalidDesignError("pseudodensities violate the partition of unity");
}

/// G = sum rho_i^p G_i, chi = sum rho_i^q chi_i, eta = sum rho_i^p eta_i.
inline EffectivePointProperties interpolate(std::span<const double> rho, const PhaseColumns& cols,
                                            const InterpolationParams& params, double theta) {
    if (rho.size() != cols.size()) throw InvalidDesignError("pseudodensity vector length does not match phase count");
    check_pseudodensity(rho);
    EffectivePointProperties out;
    out.fiber_angle = theta;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double rp = std::pow(rho[i], params.p);
        out.shear_modulus += rp * cols.shear_modulus[i];
        out.chi += std::pow(rho[i], params.q) * cols.chi[i];
        out.fiber_stiffness += rp * cols.fiber_stiffness[i];
    }
    return out;
}

inline EffectivePointProperties interpolate(std::span<const double> rho, const MaterialTable& table,
                                            const InterpolationParams& params, std::string_view solvent,
                                            double theta) {
    return interpolate(rho, table.columns(solvent), params, theta);
}

/// Partial derivatives of the interpolated properties with respect to each
/// pseudodensity component, written into dG, dchi, deta (length n_phases).
inline void interpolate_partials(std::span<const double> rho, const PhaseColumns& cols,
                                 const InterpolationParams& params, std::span<double> dG, std::span<double> dchi,
                                 std::span<double> deta) {
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double dp = params.p * std::pow(rho[i], params.p - 1.0);
        dG[i] = dp * cols.shear_modulus[i];
        dchi[i] = params.q * std::pow(rho[i], params.q - 1.0) * cols.chi[i];
        deta[i] = dp * cols.fiber_stiffness[i];
    }
}

} // namespace swelltopo
