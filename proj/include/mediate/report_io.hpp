#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "mediate/effects.hpp"
#include "mediate/lsem.hpp"

namespace mediate {

enum class OutputFormat { text, json, csv };

inline std::string_view kernel_name(Kernel k) { return k == Kernel::lag0 ? "lag0" : "bartlett"; }

namespace detail {
inline std::string printf_string(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}
}  // namespace detail

/// Percent change as displayed: 4 decimals.
inline std::string format_percent(double fraction) { return detail::printf_string("%.4f", 100.0 * fraction); }

/// Effects and standard errors as displayed: 6 significant figures.
inline std::string format_sig6(double v) { return detail::printf_string("%.6g", v); }

inline nlohmann::json estimate_json(const EffectEstimate& e) {
  nlohmann::json j{{"value", e.value},
                   {"std_error", e.std_error},
                   {"z", e.z_stat},
                   {"p_value", e.p_value},
                   {"p_underflow", e.p_underflow},
                   {"pct_change", e.pct_change},
                   {"pct_std_error", e.pct_std_error},
                   {"stars", significance_stars(e.p_value)}};
  if (e.arm) j["arm"] = *e.arm;
  return j;
}

inline nlohmann::json report_json(const EffectReport& r) {
  nlohmann::json effects;
  const auto all = r.estimates();
  for (std::size_t i = 0; i < all.size(); ++i) effects[std::string(kEffectKeys[i])] = estimate_json(*all[i]);

  nlohmann::json cov = nlohmann::json::array();
  for (int a = 0; a < 6; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int b = 0; b < 6; ++b) row.push_back(r.covariance(a, b));
    cov.push_back(row);
  }
  const auto& [control, treated] = r.arm_summaries;
  return {{"n", r.n},
          {"arms",
           {{"control", {{"count", control.count}, {"mean_outcome", control.mean_outcome}, {"mean_mediator", control.mean_mediator}}},
            {"treatment", {{"count", treated.count}, {"mean_outcome", treated.mean_outcome}, {"mean_mediator", treated.mean_mediator}}}}},
          {"estimator", {{"kernel", kernel_name(r.kernel)}, {"bandwidth", r.bandwidth}, {"iterations", r.iterations}}},
          {"effects", effects},
          {"theta", json_io::theta_json(r.theta)},
          {"theta_order", ThetaVector::names},
          {"covariance", cov}};
}

inline void write_report_text(std::ostream& out, const EffectReport& r) {
  const auto& [control, treated] = r.arm_summaries;
  out << "Estimates of causal effects (N=" << r.n << ", control=" << control.count << ", treatment=" << treated.count
      << ")\n";
  out << "Mean outcome: control " << format_sig6(control.mean_outcome) << ", treatment "
      << format_sig6(treated.mean_outcome) << "\n\n";

  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %14s %14s %14s %12s  %s\n", "Effect", "% Change", "Effect", "Std Error",
                "p-value", "");
  out << line;
  const auto all = r.estimates();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& e = *all[i];
    const std::string pct = format_percent(e.pct_change) + "%";
    const std::string p = e.p_underflow ? std::string("<1e-308") : detail::printf_string("%.4g", e.p_value);
    std::snprintf(line, sizeof(line), "%-10s %14s %14s %14s %12s  %s\n", std::string(kEffectLabels[i]).c_str(),
                  pct.c_str(), format_sig6(e.value).c_str(), format_sig6(e.std_error).c_str(), p.c_str(),
                  std::string(significance_stars(e.p_value)).c_str());
    out << line;
  }
  out << "\n1) % Change = Effect/Mean of Control\n";
  out << "2) '***' p<0.001, '**' p<0.01, '*' p<0.05, '.' p<0.1; two-tailed z-test of H0: effect is zero\n";
}

inline void write_report_csv(std::ostream& out, const EffectReport& r) {
  out << "effect,value,std_error,z,p_value,pct_change,pct_std_error,stars\n";
  const auto all = r.estimates();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& e = *all[i];
    out << kEffectKeys[i] << ',' << csv::format_number(e.value) << ',' << csv::format_number(e.std_error) << ','
        << csv::format_number(e.z_stat) << ',' << csv::format_number(e.p_value) << ','
        << csv::format_number(e.pct_change) << ',' << csv::format_number(e.pct_std_error) << ','
        << significance_stars(e.p_value) << '\n';
  }
}

inline void write_report(std::ostream& out, const EffectReport& r, OutputFormat format) {
  switch (format) {
    case OutputFormat::text: write_report_text(out, r); break;
    case OutputFormat::json: out << report_json(r).dump(2) << '\n'; break;
    case OutputFormat::csv: write_report_csv(out, r); break;
  }
}

}  // namespace mediate
