// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <functional>
#include <sstream>

#include "imuloc/pipeline/pipeline.hpp"

namespace imuloc::pipeline {

namespace {

using Getter = std::function<const eval::ErrorReport*(const SeedOutcome&)>;

std::optional<MethodRow> make_row(const std::vector<SeedOutcome>& outcomes, const std::string& method,
                                  const std::string& cp_label, const Getter& get) {
  std::vector<double> mean, median, p90;
  for (const auto& o : outcomes) {
    const eval::ErrorReport* r = get(o);
    if (r == nullptr || r->errors.empty()) continue;
    mean.push_back(r->mean);
    median.push_back(r->median);
    p90.push_back(r->p90);
  }
  if (mean.empty()) return std::nullopt;
  return MethodRow{method, cp_label, eval::seed_stats(mean), eval::seed_stats(median), eval::seed_stats(p90)};
}

void push(std::vector<MethodRow>& rows, std::optional<MethodRow> row) {
  if (row) rows.push_back(std::move(*row));
}

std::string cm(double meters) { return io::format_fixed(100.0 * meters, 1); }

std::string pm(const eval::SeedStats& s) { return cm(s.mean) + " ± " + cm(s.std); }

// Display width that counts the two-byte "±" as one column.
std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;
  }
  return w;
}

}  // namespace

std::vector<MethodRow> summary_rows(const std::vector<SeedOutcome>& outcomes, const std::string& cp_label) {
  std::vector<MethodRow> rows;
  push(rows, make_row(outcomes, "supervised", "-", [](const SeedOutcome& o) { return &o.supervised; }));
  push(rows, make_row(outcomes, "dead-reckoning labels", cp_label,
                      [](const SeedOutcome& o) { return &o.dead_reckoning_model; }));
  push(rows, make_row(outcomes, "IMU-supervised", cp_label, [](const SeedOutcome& o) -> const eval::ErrorReport* {
         return o.refinement.empty() ? nullptr : &o.refinement.front().test_error;
       }));
  push(rows, make_row(outcomes, "IMU-supervised-IR", cp_label, [](const SeedOutcome& o) -> const eval::ErrorReport* {
         return o.refinement.size() < 2 ? nullptr : &o.refinement.back().test_error;
       }));
  return rows;
}

std::vector<MethodRow> imu_error_rows(const std::vector<SeedOutcome>& outcomes, const std::string& cp_label) {
  std::vector<MethodRow> rows;
  push(rows, make_row(outcomes, "dead-reckoning", cp_label, [](const SeedOutcome& o) { return &o.dr_labels; }));
  push(rows, make_row(outcomes, "forward-backward", cp_label, [](const SeedOutcome& o) { return &o.fb_labels; }));
  return rows;
}

std::vector<MethodRow> knn_rows(const std::vector<SeedOutcome>& outcomes, const std::string& cp_label) {
  std::vector<MethodRow> rows;
  push(rows, make_row(outcomes, "k-NN", cp_label, [](const SeedOutcome& o) { return &o.knn; }));
  return rows;
}

io::CsvTable rows_to_csv(const std::vector<MethodRow>& rows) {
  io::CsvTable t({"method", "control_points", "seeds", "mean_cm", "mean_std_cm", "median_cm", "median_std_cm", "p90_cm",
                  "p90_std_cm", "mean_q10_cm", "mean_q90_cm"});
  for (const auto& r : rows) {
    t.add_row({r.method, r.control_points, std::to_string(r.mean.count), cm(r.mean.mean), cm(r.mean.std),
               cm(r.median.mean), cm(r.median.std), cm(r.p90.mean), cm(r.p90.std), cm(r.mean.q10), cm(r.mean.q90)});
  }
  return t;
}

std::string rows_to_text(const std::vector<MethodRow>& rows) {
  std::vector<std::vector<std::string>> cells{{"method", "#CP", "mean, cm", "median, cm", "90th perc., cm"}};
  for (const auto& r : rows) cells.push_back({r.method, r.control_points, pm(r.mean), pm(r.median), pm(r.p90)});
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      const auto& s = cells[i][c];
      const std::string pad(width[c] - display_width(s), ' ');
      if (c == 0) out << s << pad;
      else out << "  " << pad << s;
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
  return out.str();
}

io::CsvTable per_seed_csv(const std::vector<SeedOutcome>& outcomes) {
  io::CsvTable t({"seed", "fb_label_mean_m", "dr_label_mean_m", "supervised_mean_m", "dr_model_mean_m",
                  "imu_supervised_mean_m", "imu_supervised_ir_mean_m", "knn_mean_m"});
  auto value = [](const eval::ErrorReport* r) {
    return r == nullptr || r->errors.empty() ? std::string() : io::format_double(r->mean);
  };
  for (const auto& o : outcomes) {
    t.add_row({std::to_string(o.seed), value(&o.fb_labels), value(&o.dr_labels), value(&o.supervised),
               value(&o.dead_reckoning_model), value(o.refinement.empty() ? nullptr : &o.refinement.front().test_error),
               value(o.refinement.size() < 2 ? nullptr : &o.refinement.back().test_error), value(&o.knn)});
  }
  return t;
}

io::CsvTable iteration_csv(const std::vector<SeedOutcome>& outcomes) {
  io::CsvTable t({"seed", "iteration", "label_mean_m", "label_median_m", "test_mean_m", "test_median_m", "test_p90_m"});
  for (const auto& o : outcomes) {
    for (const auto& it : o.refinement) {
      t.add_row({std::to_string(o.seed), std::to_string(it.iteration), io::format_double(it.pseudo_label_error.mean),
                 io::format_double(it.pseudo_label_error.median), io::format_double(it.test_error.mean),
                 io::format_double(it.test_error.median), io::format_double(it.test_error.p90)});
    }
  }
  return t;
}

}  // namespace imuloc::pipeline
