#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/io/csv.hpp"
#include "resdyn/sim/residual.hpp"

namespace resdyn::sim {

/// One contiguous 100 Hz recording. Model windows never cross recording
/// boundaries, so multi-run corpora are lists of these.
struct RunRecording {
  std::size_t n = 0;
  std::vector<ResidualSample> samples;

  static std::vector<std::string> columns(std::size_t n) {
    std::vector<std::string> cols{"t"};
    auto block = [&](const std::string& prefix) {
      for (std::size_t i = 0; i < n; ++i) cols.push_back(prefix + std::to_string(i));
    };
    block("chi");
    block("chi_dot");
    block("chi_ddot");
    block("tau");
    block("r");
    return cols;
  }

  void save_csv(const std::string& path) const {
    io::CsvWriter writer(path, columns(n));
    std::vector<double> row;
    row.reserve(1 + 5 * n);
    for (const ResidualSample& s : samples) {
      row.clear();
      row.push_back(s.t);
      auto push = [&](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v(i));
      };
      push(s.chi);
      push(s.chi_dot);
      push(s.chi_ddot);
      push(s.tau);
      push(s.r);
      writer.write_row(row);
    }
  }

  static RunRecording load_csv(const std::string& path) {
    const io::CsvTable table = io::read_csv(path);
    RESDYN_REQUIRE(table.columns.size() >= 6 && (table.columns.size() - 1) % 5 == 0,
                   "dataset: unexpected column count in '" << path << "'");
    const std::size_t n = (table.columns.size() - 1) / 5;
    RESDYN_REQUIRE(columns(n) == table.columns, "dataset: unexpected header in '" << path << "'");
    RunRecording run;
    run.n = n;
    run.samples.reserve(table.rows.size());
    const auto ni = static_cast<Eigen::Index>(n);
    for (const auto& row : table.rows) {
      ResidualSample s;
      s.t = row[0];
      auto pull = [&](std::size_t offset) {
        Eigen::VectorXd v(ni);
        for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = row[offset + i];
        return v;
      };
      s.chi = pull(1);
      s.chi_dot = pull(1 + n);
      s.chi_ddot = pull(1 + 2 * n);
      s.tau = pull(1 + 3 * n);
      s.r = pull(1 + 4 * n);
      run.samples.push_back(std::move(s));
    }
    return run;
  }
};

}  // namespace resdyn::sim
