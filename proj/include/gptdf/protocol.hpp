#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "gptdf/error.hpp"
#include "gptdf/fit.hpp"
#include "gptdf/gp.hpp"

namespace gptdf {

/// A fitted feature as reported by an edge node. Carries no raw data.
struct FeatureRecord {
    std::string source_id;
    TemporalFeature feature;
    std::size_t n_points = 0;
    std::uint64_t fitted_at = 0;  // logical clock

    friend bool operator==(const FeatureRecord &, const FeatureRecord &) = default;
};

/// Empty string when the record is acceptable, otherwise the reason.
inline std::string check_record(const FeatureRecord &r) {
    if (r.source_id.empty()) return "empty source_id";
    if (!r.feature.valid()) return "invalid feature";
    if (r.n_points < kMinimumFitSize) return "n_points below " + std::to_string(kMinimumFitSize);
    return {};
}

struct FeatureQuery {
    std::string requester_id;
    std::optional<std::size_t> limit;
};

struct Ack {
    std::string source_id;
    std::uint64_t fitted_at = 0;
    bool accepted = false;
    bool duplicate = false;
    std::string reason;
};

/// Bytes of feature payload per record: three doubles, whatever the dataset size.
inline constexpr std::size_t kFeaturePayloadBytes = 3 * sizeof(double);

// Wire format: one JSON object per line. Feature-carrying messages use the
// fields type, source_id, sigma_f, sigma_l, sigma_n, n_points, fitted_at.
namespace wire {

inline nlohmann::json record_fields(const char *type, const FeatureRecord &r) {
    return {{"type", type},
            {"source_id", r.source_id},
            {"sigma_f", r.feature.sigma_f},
            {"sigma_l", r.feature.sigma_l},
            {"sigma_n", r.feature.sigma_n},
            {"n_points", r.n_points},
            {"fitted_at", r.fitted_at}};
}

inline std::string encode_report(const FeatureRecord &r) { return record_fields("report", r).dump(); }
inline std::string encode_response(const FeatureRecord &r) { return record_fields("response", r).dump(); }

inline std::string encode_query(const FeatureQuery &q) {
    nlohmann::json j{{"type", "query"}, {"source_id", q.requester_id}};
    if (q.limit) j["limit"] = *q.limit;
    return j.dump();
}

inline std::string encode_ack(const Ack &a) {
    nlohmann::json j{{"type", "ack"},
                     {"source_id", a.source_id},
                     {"fitted_at", a.fitted_at},
                     {"accepted", a.accepted},
                     {"duplicate", a.duplicate}};
    if (!a.reason.empty()) j["reason"] = a.reason;
    return j.dump();
}

inline std::string encode_error(const std::string &reason) {
    return nlohmann::json{{"type", "error"}, {"reason", reason}}.dump();
}

using Message = std::variant<FeatureRecord, FeatureQuery, Ack>;

struct Decoded {
    std::string type;
    Message message;
};

inline FeatureRecord decode_record(const nlohmann::json &j) {
    FeatureRecord r;
    r.source_id = j.at("source_id").get<std::string>();
    r.feature = {j.at("sigma_f").get<double>(), j.at("sigma_l").get<double>(), j.at("sigma_n").get<double>()};
    r.n_points = j.at("n_points").get<std::size_t>();
    r.fitted_at = j.at("fitted_at").get<std::uint64_t>();
    return r;
}

inline Decoded decode(const std::string &line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
        const auto type = j.at("type").get<std::string>();
        if (type == "report" || type == "response") return {type, decode_record(j)};
        if (type == "query") {
            FeatureQuery q{j.at("source_id").get<std::string>(), std::nullopt};
            if (j.contains("limit") && !j["limit"].is_null()) q.limit = j["limit"].get<std::size_t>();
            return {type, q};
        }
        if (type == "ack") {
            Ack a{j.at("source_id").get<std::string>(), j.at("fitted_at").get<std::uint64_t>(),
                  j.at("accepted").get<bool>(), j.at("duplicate").get<bool>(), j.value("reason", std::string{})};
            return {type, a};
        }
        if (type == "error") usage_error("remote error: " + j.value("reason", std::string{"unknown"}));
        usage_error("unknown message type '" + type + "'");
    } catch (const nlohmann::json::exception &e) {
        usage_error(std::string("malformed message: ") + e.what());
    }
}

}  // namespace wire

}  // namespace gptdf
