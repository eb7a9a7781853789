#include "vfg/data_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace vfg::io {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        size_t p = cell.find_first_not_of(' ');
        out.push_back(p == std::string::npos ? std::string() : cell.substr(p));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    Table t;
    std::string line;
    while (std::getline(in, line) && blank(line)) {
    }
    if (blank(line)) return t;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    t.header = split(line);
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        std::vector<std::string> cells = split(line);
        if (cells.size() != t.header.size())
            throw CsvError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                           " fields, found " + std::to_string(cells.size()));
        std::vector<double> row;
        for (const std::string& c : cells) {
            size_t used = 0;
            double v;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != c.size())
                throw CsvError(path + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows[r].size(); ++c) t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& values) {
    std::ofstream out(path);
    if (!out) throw CsvError("cannot write " + path);
    for (size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << "\n";
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << fmt(values(r, c));
        out << "\n";
    }
}

EnsembleData load_ensemble(const std::string& features, const std::string& predictions, const std::string& targets) {
    EnsembleData d;
    d.features = read_csv(features).values;
    d.predictions = read_csv(predictions).values;
    if (!targets.empty()) {
        Table t = read_csv(targets);
        if (t.values.rows() > 0) {
            if (t.values.cols() != 1)
                throw ModelError("targets.csv must have one column, found " + std::to_string(t.values.cols()));
            d.targets = Vec(t.values.col(0));
        }
    }
    d.validate();
    return d;
}

void save_ensemble(const EnsembleData& d, const std::string& features, const std::string& predictions,
                   const std::string& targets) {
    std::vector<std::string> fh, ph;
    for (Eigen::Index k = 0; k < d.features.cols(); ++k) fh.push_back("x" + std::to_string(k + 1));
    for (Eigen::Index j = 0; j < d.predictions.cols(); ++j) ph.push_back("obs" + std::to_string(j + 1));
    write_csv(features, fh, d.features);
    write_csv(predictions, ph, d.predictions);
    write_csv(targets, {"y"}, d.targets ? Mat(*d.targets) : Mat(0, 1));
}

}  // namespace vfg::io
