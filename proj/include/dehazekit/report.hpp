#pragma once

#include <string>

#include "dehazekit/evaluate.hpp"

namespace dhz {

// Report writers. JSON is the machine-readable source of truth and round
// trips through load_report_json; CSV carries per-image records; the text
// table mirrors the one-line-per-model, metrics-per-condition layout.
void write_report_json(const EvalReport& report, const std::string& path);
EvalReport load_report_json(const std::string& path);

void write_report_csv(const EvalReport& report, const std::string& path);

std::string render_report_table(const EvalReport& report);
void write_report_txt(const EvalReport& report, const std::string& path);

// Mean-PSNR-vs-budget curves (linf epsilons and l0 pixel counts), one
// polyline per model row group.
void write_report_svg(const EvalReport& report, const std::string& path);

} // namespace dhz
