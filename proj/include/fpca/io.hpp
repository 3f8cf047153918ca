#pragma once

#include <string>
#include <vector>

#include "fpca/curves.hpp"
#include "fpca/evaluate.hpp"
#include "fpca/inference.hpp"
#include "fpca/pace.hpp"

namespace fpca {

// Long-format CSV with header id,time,value and optionally a group column.
// Subjects come back in first-appearance order with times sorted; duplicate
// (id, time) rows and unparseable numbers are rejected with the line number.
std::vector<LongitudinalSample> ingest_csv(const std::string& path,
                                           const std::string& group_col = "group");

std::string cohort_to_csv(const std::vector<LongitudinalSample>& samples);

// 17 significant digits; round-trips the double exactly.
std::string format_double(double value);

// Writes via a temp file in the same directory plus rename.
void write_file_atomic(const std::string& path, const std::string& content);

std::string model_to_json(const FpcaModel& model);
FpcaModel model_from_json(const std::string& text);

std::string test_result_to_json(const PermutationTestResult& result,
                                const std::string& test_name);

std::string gof_to_json(const GofResult& result);
std::string gof_to_csv(const GofResult& result);

std::string future_to_json(const FutureAccuracy& result);
std::string future_to_csv(const FutureAccuracy& result);

// Long-format id,time,value[,group] rows of curves at the grid times.
std::string curves_to_csv(const CurveMatrix& curves);

// Per-model tables emitted next to the fitted model.
std::string mean_to_csv(const FpcaModel& model);
std::string eigenfunctions_to_csv(const FpcaModel& model);
std::string scores_to_csv(const FpcaModel& model);
std::string fve_to_csv(const FpcaModel& model);

}  // namespace fpca
