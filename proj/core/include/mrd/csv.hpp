#pragma once

#include <string>
#include <vector>

#include "mrd/dataset.hpp"

namespace mrd {

// Dataset CSV: header row `x1,...,xd[,y]`.  The y column is optional; without
// it the returned dataset has an empty response (semi-synthetic mode).
// Throws ParseError with row/column location, ShapeError on ragged rows.
Dataset load_feature_csv(const std::string& path);

// Sidecar with one 1-based non-null feature index per line.
std::vector<int> load_truth_sidecar(const std::string& path, int d);

void save_dataset_csv(const std::string& path, const Dataset& data);
void save_truth_sidecar(const std::string& path,
                        const std::vector<int>& nonnull);

// Low-level helpers shared by the report writers.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path);
std::string format_double(double v);

}  // namespace mrd
