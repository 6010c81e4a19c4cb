#include "fbt/output.hpp"

#include "fbt/config.hpp"
#include "fbt/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fbt {

namespace {

std::string num(Real v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

Real to_real(const std::string& s, const std::string& column) {
    Real v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError(column, "not a number: '" + s + "'");
    return v;
}

template <class I>
I to_int(const std::string& s, const std::string& column) {
    I v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError(column, "not an integer: '" + s + "'");
    return v;
}

nlohmann::ordered_json row_json(const ResultRow& r) {
    nlohmann::ordered_json j;
    auto opt = [](const auto& o) { return o ? nlohmann::ordered_json(*o) : nlohmann::ordered_json(nullptr); };
    j["run_id"] = r.run_id;
    j["lattice"] = r.lattice;
    j["n_cells"] = r.n_cells;
    j["x"] = r.x;
    j["alpha"] = r.alpha;
    j["eta"] = r.eta;
    j["moments"] = opt(r.moments);
    j["rvecs"] = opt(r.rvecs);
    j["seed"] = r.seed;
    j["E"] = opt(r.energy);
    j["observable"] = r.observable;
    j["value"] = r.value;
    j["stderr"] = opt(r.stderr);
    return j;
}

}  // namespace

const std::string* ResultTable::meta(const std::string& key) const {
    for (const auto& [k, v] : metadata)
        if (k == key) return &v;
    return nullptr;
}

const std::string& csv_header() {
    static const std::string h = "run_id,lattice,n_cells,x,alpha,eta,moments,rvecs,seed,E,observable,value,stderr";
    return h;
}

void write_csv(const ResultTable& table, std::ostream& out) {
    for (const auto& [k, v] : table.metadata) out << "# " << k << ": " << v << "\n";
    out << csv_header() << "\n";
    for (const auto& r : table.rows) {
        out << r.run_id << ',' << r.lattice << ',' << r.n_cells << ',' << num(r.x) << ',' << num(r.alpha)
            << ',' << num(r.eta) << ',' << (r.moments ? std::to_string(*r.moments) : "") << ','
            << (r.rvecs ? std::to_string(*r.rvecs) : "") << ',' << r.seed << ','
            << (r.energy ? num(*r.energy) : "") << ',' << r.observable << ',' << num(r.value) << ','
            << (r.stderr ? num(*r.stderr) : "") << "\n";
    }
}

void write_json(const ResultTable& table, std::ostream& out) {
    nlohmann::ordered_json j;
    j["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : table.metadata) j["metadata"][k] = v;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : table.rows) j["rows"].push_back(row_json(r));
    out << j.dump(1) << "\n";
}

void write_table(const ResultTable& table, const std::string& path, OutputFormat format) {
    auto emit = [&](std::ostream& os) {
        if (format == OutputFormat::JSON) write_json(table, os);
        else write_csv(table, os);
    };
    if (path.empty() || path == "-") {
        emit(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    emit(out);
    if (!out) throw Error("write to '" + path + "' failed");
}

ResultTable read_csv(std::istream& in) {
    ResultTable t;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (!header && line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ", 2);
            if (colon == std::string::npos) throw ConfigError("metadata", "malformed line '" + line + "'");
            t.metadata.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
            continue;
        }
        if (!header) {
            if (line != csv_header()) throw ConfigError("header", "expected '" + csv_header() + "'");
            header = true;
            continue;
        }
        const auto c = split(line);
        if (c.size() != 13) throw ConfigError("row", "expected 13 columns, got " + std::to_string(c.size()));
        ResultRow r;
        r.run_id = c[0];
        r.lattice = c[1];
        r.n_cells = to_int<int>(c[2], "n_cells");
        r.x = to_real(c[3], "x");
        r.alpha = to_real(c[4], "alpha");
        r.eta = to_real(c[5], "eta");
        if (!c[6].empty()) r.moments = to_int<int>(c[6], "moments");
        if (!c[7].empty()) r.rvecs = to_int<int>(c[7], "rvecs");
        r.seed = to_int<std::uint64_t>(c[8], "seed");
        if (!c[9].empty()) r.energy = to_real(c[9], "E");
        r.observable = c[10];
        r.value = to_real(c[11], "value");
        if (!c[12].empty()) r.stderr = to_real(c[12], "stderr");
        t.rows.push_back(std::move(r));
    }
    if (!header) throw ConfigError("header", "missing CSV header");
    return t;
}

ResultTable read_json(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("<json>", e.what());
    }
    ResultTable t;
    try {
        for (const auto& [k, v] : j.at("metadata").items()) t.metadata.emplace_back(k, v.get<std::string>());
        for (const auto& o : j.at("rows")) {
            ResultRow r;
            r.run_id = o.at("run_id").get<std::string>();
            r.lattice = o.at("lattice").get<std::string>();
            r.n_cells = o.at("n_cells").get<int>();
            r.x = o.at("x").get<Real>();
            r.alpha = o.at("alpha").get<Real>();
            r.eta = o.at("eta").get<Real>();
            if (!o.at("moments").is_null()) r.moments = o["moments"].get<int>();
            if (!o.at("rvecs").is_null()) r.rvecs = o["rvecs"].get<int>();
            r.seed = o.at("seed").get<std::uint64_t>();
            if (!o.at("E").is_null()) r.energy = o["E"].get<Real>();
            r.observable = o.at("observable").get<std::string>();
            r.value = o.at("value").get<Real>();
            if (!o.at("stderr").is_null()) r.stderr = o["stderr"].get<Real>();
            t.rows.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("rows", e.what());
    }
    return t;
}

ResultTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
    const int first = in.peek();
    return first == '{' ? read_json(in) : read_csv(in);
}

}  // namespace fbt
