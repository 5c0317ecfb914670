#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "swelltopo/io.hpp"
#include "swelltopo/optim/optimizer.hpp"

namespace swelltopo {

/// Per-iteration log. Values are written round-trip exact; wall time is kept
/// in a separate table so repeated seeded runs produce identical bytes here.
class HistoryTable {
public:
    explicit HistoryTable(const OptimizationProblem& p) {
        std::ostringstream os;
        os << "iteration,loss,J,J_over_J0";
        for (const auto& c : p.constraints) os << ",g_" << c.name;
        for (const auto& c : p.constraints) os << ",raw_" << c.name;
        os << ",grayness,tau,p,xi,beta";
        for (const auto& lc : p.load_cases) os << ",newton_" << lc.name;
        os << ",gradient_norm,adjoint_residual\n";
        header_ = os.str();
        timing_ = "iteration,seconds\n";
    }

    void append(const Evaluation& ev) {
        std::ostringstream os;
        os << ev.iteration << ',' << format_double(ev.loss) << ',' << format_double(ev.objective_raw) << ','
           << format_double(ev.objective_term);
        for (double g : ev.constraint_values) os << ',' << format_double(g);
        for (double r : ev.constraint_raw) os << ',' << format_double(r);
        os << ',' << format_double(ev.grayness) << ',' << format_double(ev.tau) << ',' << format_double(ev.p) << ','
           << format_double(ev.xi) << ',' << format_double(ev.beta);
        for (int n : ev.newton_iterations) os << ',' << n;
        os << ',' << format_double(ev.gradient_norm) << ',' << format_double(ev.adjoint_certificate) << '\n';
        rows_ += os.str();
        timing_ += std::to_string(ev.iteration) + ',' + format_double(ev.seconds) + '\n';
        ++count_;
    }

    std::string csv() const { return header_ + rows_; }
    const std::string& timing_csv() const { return timing_; }
    int rows() const { return count_; }

private:
    std::string header_, rows_, timing_;
    int count_ = 0;
};

} // namespace swelltopo
