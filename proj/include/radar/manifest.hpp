#pragma once

#include <string>
#include <vector>

namespace radar::data {

// One chip (or scene) entry in a JSON-lines dataset manifest.
struct ManifestRecord {
    std::string path;  // RADR raster file, relative to the manifest's directory
    int label = 0;
    double range_m = 0.0;
    int receiver_id = 0;
    double aspect_deg = 0.0;
    int quadrant = 1;  // derived from aspect_deg, kept in the file for filtering
};

// Aspect-angle quadrant: Q1 covers 0-89 deg, Q2 90-179, Q3 180-269, Q4 270-359.
// Angles outside [0, 360) are wrapped first.
int quadrant_of(double aspect_deg);

std::vector<ManifestRecord> manifest_read(const std::string& path);
void manifest_write(const std::string& path, const std::vector<ManifestRecord>& records);

// Directory part of a path ("" if none); records' paths resolve against it.
std::string parent_dir(const std::string& path);
std::string join_path(const std::string& dir, const std::string& rel);

}  // namespace radar::data
