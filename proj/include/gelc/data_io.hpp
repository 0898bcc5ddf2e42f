// data_io.hpp
//
// File ingestion for the CLI and bindings: delimited data files with a header
// row, and scenario description files in JSON. Parsing failures carry 1-based
// line numbers (data files) or a JSON path (scenario files).

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gelc/model.hpp"
#include "gelc/simulation.hpp"

namespace gelc {

// A parsed data file. Columns: y (response), zl/zr (interval endpoints, half
// open by convention, exact when equal), optional zl_closed/zr_closed (0/1
// overrides of the endpoint openness), and any number of covariate columns
// whose names start with 'x'. Field order is free; the delimiter (comma,
// semicolon, tab, or whitespace) is inferred from the header.
struct DataFileContent {
    Dataset data;
    std::vector<std::string> x_names;  // in order of appearance
};

DataFileContent read_data_file(const std::string& path);
DataFileContent read_data_stream(std::istream& in, const std::string& origin = "<stream>");

// Scenario JSON: either an array of scenario objects or {"scenarios": [...]}.
// Each object carries name, family, n, replications, seed, z_mean,
// censor_mean_width, and true_theta {alpha, beta?, gamma, phi?}.
std::vector<Scenario> load_scenarios(const std::string& path);
std::vector<Scenario> parse_scenarios(const std::string& json_text,
                                      const std::string& origin = "<string>");

}  // namespace gelc
