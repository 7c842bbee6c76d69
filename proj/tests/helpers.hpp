#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include "radar/image.hpp"

namespace testutil {

// Scratch directory removed when the test block ends.
struct TmpDir {
    std::filesystem::path path;
    TmpDir() {
        auto base = std::filesystem::temp_directory_path() / "radar_test_XXXXXX";
        std::string s = base.string();
        path = mkdtemp(s.data());
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline radar::CartesianImage make_image(int rows, int cols,
                                        const std::function<float(int, int)>& f,
                                        double cell = 0.0075) {
    radar::CartesianImage img = radar::CartesianImage::zeros(rows, cols, cell);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) img.at(r, c) = f(r, c);
    return img;
}

}  // namespace testutil
