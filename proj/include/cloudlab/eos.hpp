#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace cloudlab {

// Regularity class of the initial data: case A admits 1 < gamma <= 5/3,
// case B admits 1 < gamma <= 2 (and demands one extra degree of smoothness
// from the density profile; see scenarios).
enum class RegularityCase { A, B };

// Isentropic gas law p = K rho^gamma together with the rescaled sound-speed
// variable alpha = (2 sqrt(K gamma)/(gamma-1)) rho^((gamma-1)/2).  alpha is
// the quantity that stays regular across the vacuum boundary, so it is the
// primary stored variable everywhere in this code.
struct EquationOfState {
    double K = 1.0;
    double gamma = 2.0;
    RegularityCase regularity_case = RegularityCase::B;

    EquationOfState() = default;

    EquationOfState(double K_, double gamma_, RegularityCase rc)
        : K(K_), gamma(gamma_), regularity_case(rc)
    {
        if (!(K > 0.0))
            throw std::invalid_argument("EquationOfState: K must be positive");
        if (!(gamma > 1.0))
            throw std::invalid_argument("EquationOfState: gamma must exceed 1");
        if (rc == RegularityCase::A && !(gamma <= 5.0 / 3.0))
            throw std::invalid_argument("EquationOfState: case A requires gamma <= 5/3");
        if (rc == RegularityCase::B && !(gamma <= 2.0))
            throw std::invalid_argument("EquationOfState: case B requires gamma <= 2");
    }

    // 2 sqrt(K gamma) / (gamma - 1)
    double alpha_coeff() const { return 2.0 * std::sqrt(K * gamma) / (gamma - 1.0); }

    double density_to_makino(double rho) const
    {
        if (rho < 0.0)
            throw std::domain_error("density_to_makino: negative density");
        return alpha_coeff() * std::pow(rho, 0.5 * (gamma - 1.0));
    }

    double makino_to_density(double alpha) const
    {
        if (alpha < 0.0)
            throw std::domain_error("makino_to_density: negative alpha");
        // rho = (alpha / c)^(2/(gamma-1)) with c = alpha_coeff()
        return std::pow(alpha / alpha_coeff(), 2.0 / (gamma - 1.0));
    }

    double pressure(double rho) const
    {
        if (rho < 0.0)
            throw std::domain_error("pressure: negative density");
        return K * std::pow(rho, gamma);
    }

    // c_s = sqrt(dp/drho) = sqrt(K gamma) rho^((gamma-1)/2) = (gamma-1) alpha / 2
    double sound_speed(double alpha) const
    {
        if (alpha < 0.0)
            throw std::domain_error("sound_speed: negative alpha");
        return 0.5 * (gamma - 1.0) * alpha;
    }

    // alpha^2 as a function of rho: alpha^2 = (4 K gamma/(gamma-1)^2) rho^(gamma-1).
    // Used by the momentum coupling, which only ever needs grad(alpha^2).
    double alpha_squared_of_density(double rho) const
    {
        if (rho < 0.0)
            throw std::domain_error("alpha_squared_of_density: negative density");
        double c = alpha_coeff();
        return c * c * std::pow(rho, gamma - 1.0);
    }
};

} // namespace cloudlab
