#include "radar/manifest.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radar/errors.hpp"

namespace radar::data {

int quadrant_of(double aspect_deg) {
    double a = std::fmod(aspect_deg, 360.0);
    if (a < 0) a += 360.0;
    return 1 + static_cast<int>(a / 90.0) % 4;
}

std::vector<ManifestRecord> manifest_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::vector<ManifestRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest " + path + " line " + std::to_string(lineno) +
                              ": " + e.what());
        }
        ManifestRecord r;
        try {
            r.path = j.at("path").get<std::string>();
            r.label = j.at("label").get<int>();
            r.range_m = j.at("range_m").get<double>();
            r.receiver_id = j.at("receiver_id").get<int>();
            r.aspect_deg = j.at("aspect_deg").get<double>();
            r.quadrant = j.value("quadrant", quadrant_of(r.aspect_deg));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest " + path + " line " + std::to_string(lineno) +
                              ": " + e.what());
        }
        if (r.quadrant < 1 || r.quadrant > 4)
            throw FormatError("manifest " + path + " line " + std::to_string(lineno) +
                              ": quadrant out of range");
        out.push_back(std::move(r));
    }
    return out;
}

void manifest_write(const std::string& path, const std::vector<ManifestRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (const auto& r : records) {
        nlohmann::json j;
        j["path"] = r.path;
        j["label"] = r.label;
        j["range_m"] = r.range_m;
        j["receiver_id"] = r.receiver_id;
        j["aspect_deg"] = r.aspect_deg;
        j["quadrant"] = r.quadrant;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing manifest: " + path);
}

std::string parent_dir(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string() : path.substr(0, pos);
}

std::string join_path(const std::string& dir, const std::string& rel) {
    if (dir.empty() || (!rel.empty() && rel.front() == '/')) return rel;
    return dir + "/" + rel;
}

}  // namespace radar::data
