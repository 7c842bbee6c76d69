#include "radar/splits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "radar/errors.hpp"
#include "radar/rng.hpp"

namespace radar::data {

namespace {

SplitResult partition_by(const std::vector<ManifestRecord>& records, const char* what,
                         bool (*is_test)(const ManifestRecord&, const ExperimentSpec&),
                         const ExperimentSpec& spec) {
    SplitResult out;
    for (int i = 0; i < static_cast<int>(records.size()); ++i) {
        (is_test(records[i], spec) ? out.test_idx : out.train_idx).push_back(i);
    }
    if (out.train_idx.empty() || out.test_idx.empty())
        throw InvalidInputError(std::string("split_manifest: ") + what +
                                " leaves an empty train or test set for this manifest");
    return out;
}

}  // namespace

SplitResult split_manifest(const std::vector<ManifestRecord>& records, const ExperimentSpec& spec) {
    if (records.empty()) throw InvalidInputError("split_manifest: empty manifest");

    switch (spec.split) {
        case SplitMode::kRandom7030: {
            std::vector<int> order(records.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            Rng rng = Rng(spec.seed).split(0x737068756666ull);  // shuffle stream
            for (size_t i = order.size(); i > 1; --i) {
                const size_t j = rng.bounded(i);
                std::swap(order[i - 1], order[j]);
            }
            const size_t n_train =
                static_cast<size_t>(std::floor(0.7 * static_cast<double>(order.size()) + 0.5));
            SplitResult out;
            out.train_idx.assign(order.begin(), order.begin() + n_train);
            out.test_idx.assign(order.begin() + n_train, order.end());
            std::sort(out.train_idx.begin(), out.train_idx.end());
            std::sort(out.test_idx.begin(), out.test_idx.end());
            if (out.train_idx.empty() || out.test_idx.empty())
                throw InvalidInputError(
                    "split_manifest: manifest too small for a 70/30 partition");
            return out;
        }
        case SplitMode::kByReceiver:
            return partition_by(
                records, "receiver hold-out",
                [](const ManifestRecord& r, const ExperimentSpec& s) {
                    return r.receiver_id == s.test_receiver;
                },
                spec);
        case SplitMode::kByRange:
            return partition_by(
                records, "range hold-out",
                [](const ManifestRecord& r, const ExperimentSpec& s) {
                    return std::fabs(r.range_m - s.test_range_m) <= 1e-3;
                },
                spec);
        case SplitMode::kByQuadrant:
            return partition_by(
                records, "quadrant hold-out",
                [](const ManifestRecord& r, const ExperimentSpec&) {
                    return r.quadrant == 2 || r.quadrant == 4;
                },
                spec);
    }
    throw InvalidInputError("split_manifest: unknown split mode");
}

void parse_split(const std::string& text, ExperimentSpec& spec) {
    if (text == "random_70_30") {
        spec.split = SplitMode::kRandom7030;
        return;
    }
    if (text == "by_quadrant") {
        spec.split = SplitMode::kByQuadrant;
        return;
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (head == "by_receiver") {
        int receiver = spec.test_receiver;
        if (!arg.empty()) {
            char* end = nullptr;
            const long v = std::strtol(arg.c_str(), &end, 10);
            if (end == nullptr || *end != '\0')
                throw InvalidInputError("parse_split: bad receiver id '" + arg + "'");
            receiver = static_cast<int>(v);
        }
        spec.split = SplitMode::kByReceiver;
        spec.test_receiver = receiver;
        return;
    }
    if (head == "by_range") {
        double range = spec.test_range_m;
        if (!arg.empty()) {
            char* end = nullptr;
            const double v = std::strtod(arg.c_str(), &end);
            if (end == nullptr || *end != '\0')
                throw InvalidInputError("parse_split: bad range '" + arg + "'");
            range = v;
        }
        spec.split = SplitMode::kByRange;
        spec.test_range_m = range;
        return;
    }
    throw InvalidInputError(
        "parse_split: unknown split '" + text +
        "' (expected random_70_30, by_receiver:<id>, by_range:<m> or by_quadrant)");
}

std::string split_name(const ExperimentSpec& spec) {
    char buf[64];
    switch (spec.split) {
        case SplitMode::kRandom7030:
            return "random_70_30";
        case SplitMode::kByReceiver:
            std::snprintf(buf, sizeof buf, "by_receiver:%d", spec.test_receiver);
            return buf;
        case SplitMode::kByRange:
            std::snprintf(buf, sizeof buf, "by_range:%g", spec.test_range_m);
            return buf;
        case SplitMode::kByQuadrant:
            return "by_quadrant";
    }
    return "?";
}

}  // namespace radar::data
