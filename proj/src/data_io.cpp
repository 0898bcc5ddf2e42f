// data_io.cpp

#include "gelc/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gelc/errors.hpp"

namespace gelc {

namespace {

char detect_delimiter(const std::string& header) {
    if (header.find(',') != std::string::npos) return ',';
    if (header.find(';') != std::string::npos) return ';';
    if (header.find('\t') != std::string::npos) return '\t';
    return ' ';
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    if (delim == ' ') {
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) out.push_back(tok);
        return out;
    }
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        while (!f.empty() && std::isspace(static_cast<unsigned char>(f.front()))) f.erase(0, 1);
        while (!f.empty() && std::isspace(static_cast<unsigned char>(f.back()))) f.pop_back();
    }
    return out;
}

double parse_number(const std::string& field, const std::string& column, long line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size())
            throw ParseError("trailing characters in numeric field '" + field + "' for column " +
                                 column,
                             line_no);
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError("cannot parse '" + field + "' as a number for column " + column,
                         line_no);
    }
}

bool parse_flag(const std::string& field, const std::string& column, long line_no) {
    if (field == "1" || field == "true" || field == "TRUE") return true;
    if (field == "0" || field == "false" || field == "FALSE") return false;
    throw ParseError("column " + column + " expects 0/1, got '" + field + "'", line_no);
}

}  // namespace

DataFileContent read_data_stream(std::istream& in, const std::string& origin) {
    std::string header;
    if (!std::getline(in, header)) throw ParseError(origin + ": empty input", 1);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const char delim = detect_delimiter(header);
    const std::vector<std::string> cols = split_fields(header, delim);

    int idx_y = -1, idx_zl = -1, idx_zr = -1, idx_lc = -1, idx_rc = -1;
    std::vector<int> idx_x;
    DataFileContent out;
    for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
        const std::string& name = cols[c];
        if (name == "y") idx_y = c;
        else if (name == "zl") idx_zl = c;
        else if (name == "zr") idx_zr = c;
        else if (name == "zl_closed") idx_lc = c;
        else if (name == "zr_closed") idx_rc = c;
        else if (!name.empty() && name[0] == 'x') {
            idx_x.push_back(c);
            out.x_names.push_back(name);
        } else {
            throw ParseError(origin + ": unrecognized column '" + name +
                                 "' (expected y, zl, zr, zl_closed, zr_closed, or x...)",
                             1);
        }
    }
    if (idx_y < 0 || idx_zl < 0 || idx_zr < 0)
        throw ParseError(origin + ": required columns y, zl, zr not all present", 1);

    std::string line;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_fields(line, delim);
        if (fields.size() != cols.size())
            throw ParseError(origin + ": expected " + std::to_string(cols.size()) +
                                 " fields, found " + std::to_string(fields.size()),
                             line_no);

        Observation obs;
        obs.y = parse_number(fields[idx_y], "y", line_no);
        const double zl = parse_number(fields[idx_zl], "zl", line_no);
        const double zr = parse_number(fields[idx_zr], "zr", line_no);
        if (zl > zr)
            throw ParseError(origin + ": zl > zr (" + fields[idx_zl] + " > " + fields[idx_zr] +
                                 ")",
                             line_no);
        obs.interval = make_interval(zl, zr);
        if (idx_lc >= 0) obs.interval.left_closed = parse_flag(fields[idx_lc], "zl_closed",
                                                               line_no);
        if (idx_rc >= 0) obs.interval.right_closed = parse_flag(fields[idx_rc], "zr_closed",
                                                                line_no);
        try {
            validate_interval(obs.interval);
        } catch (const DomainError& e) {
            throw ParseError(origin + ": " + e.what(), line_no);
        }

        obs.x = Eigen::VectorXd(idx_x.size());
        for (std::size_t k = 0; k < idx_x.size(); ++k)
            obs.x[k] = parse_number(fields[idx_x[k]], out.x_names[k], line_no);
        out.data.push_back(std::move(obs));
    }
    if (out.data.empty()) throw ParseError(origin + ": no data rows", line_no);
    return out;
}

DataFileContent read_data_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open data file: " + path);
    return read_data_stream(in, path);
}

namespace {

Scenario scenario_from_json(const nlohmann::json& js, const std::string& origin, int index) {
    const std::string where = origin + ": scenario " + std::to_string(index + 1);
    if (!js.is_object()) throw ParseError(where + " is not an object");
    Scenario sc;
    try {
        sc.name = js.value("name", "scenario-" + std::to_string(index + 1));
        sc.family = family_from_name(js.at("family").get<std::string>());
        sc.n = js.at("n").get<int>();
        sc.replications = js.at("replications").get<int>();
        sc.seed = js.value("seed", std::uint64_t{1});
        sc.z_mean = js.value("z_mean", 12.0);
        sc.censor_mean_width = js.value("censor_mean_width", 0.0);

        const auto& th = js.at("true_theta");
        sc.true_theta.alpha = th.value("alpha", 0.0);
        sc.true_theta.gamma = th.at("gamma").get<double>();
        sc.true_theta.phi = th.value("phi", 1.0);
        if (th.contains("beta")) {
            const auto& b = th.at("beta");
            sc.true_theta.beta = Eigen::VectorXd(b.size());
            for (std::size_t k = 0; k < b.size(); ++k)
                sc.true_theta.beta[k] = b.at(k).get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": " + e.what());
    } catch (const DomainError& e) {
        throw ParseError(where + ": " + e.what());
    }
    if (sc.n < 3) throw ParseError(where + ": n too small");
    if (sc.replications < 2) throw ParseError(where + ": replications must be at least 2");
    if (sc.z_mean <= 0.0) throw ParseError(where + ": z_mean must be positive");
    if (sc.censor_mean_width < 0.0)
        throw ParseError(where + ": censor_mean_width must be nonnegative");
    if (has_dispersion(sc.family) && sc.true_theta.phi <= 0.0)
        throw ParseError(where + ": phi must be positive");
    return sc;
}

}  // namespace

std::vector<Scenario> parse_scenarios(const std::string& json_text, const std::string& origin) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    const nlohmann::json* arr = nullptr;
    if (root.is_array()) {
        arr = &root;
    } else if (root.is_object() && root.contains("scenarios") && root["scenarios"].is_array()) {
        arr = &root["scenarios"];
    } else {
        throw ParseError(origin + ": expected an array of scenarios or {\"scenarios\": [...]}");
    }
    if (arr->empty()) throw ParseError(origin + ": no scenarios");

    std::vector<Scenario> out;
    out.reserve(arr->size());
    for (std::size_t k = 0; k < arr->size(); ++k)
        out.push_back(scenario_from_json(arr->at(k), origin, static_cast<int>(k)));
    return out;
}

std::vector<Scenario> load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenarios(buf.str(), path);
}

}  // namespace gelc
