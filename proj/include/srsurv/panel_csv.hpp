#pragma once

#include "srsurv/panel.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace srsurv {

struct PanelReadOptions {
    std::optional<double> rounding;
    Schedule schedule = Schedule::adaptive;
    // Time-fixed covariates, one row per subject: subject_id,cov1,...
    std::optional<std::string> baseline_path;
    // Throw PanelError when the parsed dataset fails validation.
    bool strict = true;
};

struct PanelReadResult {
    Dataset dataset;
    std::size_t imputed_values = 0;  // LOCF fills
    std::size_t merged_visits = 0;   // same-subject collisions after rounding
    ValidationReport report;
};

// Long format: header `subject_id,time,result[,cov...]`, one row per visit.
// Empty covariate cells are filled by last observation carried forward.
PanelReadResult read_panel_csv(const std::string& path, const PanelReadOptions& options = {});
PanelReadResult read_panel_csv(std::istream& in, const std::string& source_name, const PanelReadOptions& options = {});

void write_panel_csv(std::ostream& out, const Dataset& dataset);
void write_panel_csv(const std::string& path, const Dataset& dataset);

// Splits one CSV record. Double quotes group fields containing commas.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace srsurv
