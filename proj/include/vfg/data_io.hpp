#pragma once
#include <stdexcept>
#include <string>
#include <vector>

#include "vfg/models.hpp"

namespace vfg::io {

class CsvError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> header;
    Mat values;  // rows x header.size(); zero rows when the file has only a header (or is empty)
};

/// Comma-separated numeric table with a mandatory header row.
Table read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& values);

/// features.csv (m x d), predictions.csv (n x m), targets.csv (m x 1, may be empty).
EnsembleData load_ensemble(const std::string& features, const std::string& predictions, const std::string& targets);
void save_ensemble(const EnsembleData& d, const std::string& features, const std::string& predictions,
                   const std::string& targets);

/// 17 significant digits.
std::string fmt(double v);

}  // namespace vfg::io
