#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gptdf/data_io.hpp"
#include "gptdf/error.hpp"
#include "gptdf/evaluation.hpp"
#include "gptdf/fit.hpp"
#include "gptdf/fusion.hpp"
#include "gptdf/protocol.hpp"

namespace gptdf {

/// Cloud-side store of reported features. Thread-safe; idempotent per
/// (source_id, fitted_at). With a store path, accepted records are appended
/// to it as JSON lines and reloaded on construction.
class FeatureRegistry {
public:
    FeatureRegistry() = default;

    explicit FeatureRegistry(std::filesystem::path store) : store_(std::move(store)) {
        std::ifstream in(*store_);
        for (std::string line; std::getline(in, line);) {
            if (line.empty()) continue;
            auto decoded = wire::decode(line);
            const auto *rec = std::get_if<FeatureRecord>(&decoded.message);
            if (!rec) usage_error("registry store holds a non-record line: " + store_->string());
            if (!contains(rec->source_id, rec->fitted_at)) records_.push_back(*rec);
        }
    }

    Ack report(const FeatureRecord &record) {
        Ack ack{record.source_id, record.fitted_at, false, false, check_record(record)};
        if (!ack.reason.empty()) return ack;
        std::lock_guard lock(mutex_);
        ack.accepted = true;
        if (contains(record.source_id, record.fitted_at)) {
            ack.duplicate = true;
            return ack;
        }
        records_.push_back(record);
        if (store_) {
            std::ofstream out(*store_, std::ios::app);
            if (!out) usage_error("cannot append to registry store: " + store_->string());
            out << wire::encode_report(record) << '\n';
        }
        return ack;
    }

    /// Records not owned by the requester, newest fitted_at first (ties by
    /// source_id), truncated to the query's limit.
    [[nodiscard]] std::vector<FeatureRecord> query(const FeatureQuery &q) const {
        std::vector<FeatureRecord> out;
        {
            std::lock_guard lock(mutex_);
            for (const auto &r : records_)
                if (r.source_id != q.requester_id) out.push_back(r);
        }
        std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
            if (a.fitted_at != b.fitted_at) return a.fitted_at > b.fitted_at;
            return a.source_id < b.source_id;
        });
        if (q.limit && out.size() > *q.limit) out.resize(*q.limit);
        return out;
    }

    [[nodiscard]] std::vector<FeatureRecord> snapshot() const {
        std::lock_guard lock(mutex_);
        return records_;
    }

    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return records_.size();
    }

private:
    bool contains(const std::string &id, std::uint64_t fitted_at) const {
        return std::any_of(records_.begin(), records_.end(),
                           [&](const auto &r) { return r.source_id == id && r.fitted_at == fitted_at; });
    }

    mutable std::mutex mutex_;
    std::vector<FeatureRecord> records_;
    std::optional<std::filesystem::path> store_;
};

/// Answers line-delimited JSON messages against a registry.
class CloudServer {
public:
    explicit CloudServer(FeatureRegistry &registry) : registry_(registry) {}

    std::vector<std::string> handle(const std::string &line) {
        try {
            const auto decoded = wire::decode(line);
            if (decoded.type == "report") return {wire::encode_ack(registry_.report(std::get<FeatureRecord>(decoded.message)))};
            if (decoded.type == "query") {
                std::vector<std::string> out;
                for (const auto &r : registry_.query(std::get<FeatureQuery>(decoded.message)))
                    out.push_back(wire::encode_response(r));
                return out;
            }
            return {wire::encode_error("unexpected message type '" + decoded.type + "'")};
        } catch (const Error &e) {
            return {wire::encode_error(e.what())};
        }
    }

private:
    FeatureRegistry &registry_;
};

struct TrafficEntry {
    std::string from;
    std::string to;
    std::string line;
};

/// Every message that crossed a channel, in order.
class TrafficLog {
public:
    void record(std::string from, std::string to, std::string line) {
        std::lock_guard lock(mutex_);
        entries_.push_back({std::move(from), std::move(to), std::move(line)});
    }

    [[nodiscard]] std::vector<TrafficEntry> entries() const {
        std::lock_guard lock(mutex_);
        return entries_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<TrafficEntry> entries_;
};

class Channel {
public:
    virtual ~Channel() = default;
    /// Sends one request line from `sender` and returns the reply lines.
    virtual std::vector<std::string> send(const std::string &sender, const std::string &line) = 0;
};

class InProcessChannel final : public Channel {
public:
    explicit InProcessChannel(CloudServer &server, TrafficLog *tap = nullptr) : server_(server), tap_(tap) {}

    std::vector<std::string> send(const std::string &sender, const std::string &line) override {
        if (tap_) tap_->record(sender, "cloud", line);
        auto replies = server_.handle(line);
        if (tap_)
            for (const auto &r : replies) tap_->record("cloud", sender, r);
        return replies;
    }

private:
    CloudServer &server_;
    TrafficLog *tap_;
};

inline Ack report_features(Channel &channel, const FeatureRecord &record) {
    const auto replies = channel.send(record.source_id, wire::encode_report(record));
    if (replies.size() != 1) usage_error("expected a single acknowledgment");
    const auto decoded = wire::decode(replies.front());
    const auto *ack = std::get_if<Ack>(&decoded.message);
    if (!ack) usage_error("expected an acknowledgment, got '" + decoded.type + "'");
    return *ack;
}

inline std::vector<FeatureRecord> query_features(Channel &channel, const FeatureQuery &query) {
    std::vector<FeatureRecord> out;
    for (const auto &line : channel.send(query.requester_id, wire::encode_query(query))) {
        const auto decoded = wire::decode(line);
        if (decoded.type != "response") usage_error("expected a response, got '" + decoded.type + "'");
        out.push_back(std::get<FeatureRecord>(decoded.message));
    }
    if (query.limit && out.size() > *query.limit) usage_error("response exceeds the requested limit");
    return out;
}

/// Prior used by a target node when the registry has nothing to offer.
inline constexpr TemporalFeature kFallbackFeature{1.0, 1.0, 0.1};

enum class NodeRole { Historical, Target };

struct NodeReport {
    std::string node_id;
    NodeRole role = NodeRole::Historical;
    std::optional<FeatureRecord> record;  // historical
    Ack ack;                              // historical
    PredictionLog log;                    // target
    std::vector<std::string> model_ids;   // target: experts actually fused
    bool used_fallback = false;           // target
    Diagnostics diagnostics;              // target
};

struct TargetOptions {
    std::optional<std::size_t> limit;
    std::vector<std::string> model_ids;  // empty means every returned feature
    FusionConfig fusion{};
    KernelKind kernel = KernelKind::Matern52;
};

/// A historical node fits its (already normalized) local series, reports the
/// feature and keeps the data to itself.
inline NodeReport run_historical_node(const std::string &id, const TimeSeries &local, Channel &channel,
                                      const FitConfig &fit, std::uint64_t fitted_at) {
    NodeReport report;
    report.node_id = id;
    report.role = NodeRole::Historical;
    try {
        const auto result = fit_hyperparameters(local, fit);
        FeatureRecord record{id, result.feature, local.size(), fitted_at};
        report.ack = report_features(channel, record);
        if (!report.ack.accepted) numerical_error("report rejected: " + report.ack.reason);
        report.record = record;
    } catch (const Error &e) {
        throw Error(e.kind(), "node " + id + ": " + e.what());
    }
    return report;
}

/// A cold-start target node queries the cloud, builds its ensemble from the
/// response and predicts its stream online from the first step.
inline NodeReport run_target_node(const std::string &id, const TimeSeries &stream, Channel &channel,
                                  const TargetOptions &opts) {
    NodeReport report;
    report.node_id = id;
    report.role = NodeRole::Target;
    try {
        const auto response = query_features(channel, {id, opts.limit});
        std::vector<NamedFeature> available;
        for (const auto &r : response) available.push_back({r.source_id, r.feature});

        std::vector<GPModel> models;
        if (opts.model_ids.empty()) {
            for (const auto &f : available) {
                models.push_back(GPModel::from_feature(f.feature, opts.kernel));
                report.model_ids.push_back(f.id);
            }
        } else {
            models = select_models(available, opts.model_ids, opts.kernel);
            report.model_ids = opts.model_ids;
        }
        if (models.empty()) {
            models.push_back(GPModel::from_feature(kFallbackFeature, opts.kernel));
            report.used_fallback = true;
        }
        auto run = run_gptdf(std::move(models), stream, opts.fusion);
        report.log = std::move(run.log);
        report.diagnostics = run.state.diagnostics;
    } catch (const Error &e) {
        throw Error(e.kind(), "node " + id + ": " + e.what());
    }
    return report;
}

enum class NormalizationMode { Offline, Online, None };

struct StreamSource {
    std::string id;
    // Exactly one of a CSV path or a synthetic feature.
    std::optional<std::filesystem::path> csv;
    CsvOptions csv_options{};
    std::optional<TemporalFeature> synthetic;
    std::size_t n = 0;
    std::optional<std::uint64_t> seed;
};

struct Scenario {
    std::vector<StreamSource> historical;
    StreamSource target;
    FusionConfig fusion{};
    FitConfig fit{};
    std::optional<std::size_t> limit;
    std::vector<std::string> model_ids;
    NormalizationMode normalization = NormalizationMode::Offline;
    std::uint64_t seed = 0;
    std::string method_name = "GPTDF";
    std::optional<std::filesystem::path> registry_store;
    bool original_scale = false;  // score the target in original units
};

inline TimeSeries load_source(const StreamSource &src, std::uint64_t fallback_seed, KernelKind kernel) {
    if (src.csv) return load_csv(*src.csv, src.csv_options);
    if (src.synthetic) return generate_synthetic(*src.synthetic, src.n, src.seed.value_or(fallback_seed), kernel);
    usage_error("source '" + src.id + "' has neither csv nor synthetic data");
}

/// With `per_step`, also returns the statistics that scaled each value, so
/// predictions can be mapped back to original units.
inline TimeSeries apply_normalization(const TimeSeries &raw, NormalizationMode mode,
                                      std::vector<NormalizationStats> *per_step = nullptr) {
    switch (mode) {
        case NormalizationMode::Offline: {
            auto [out, stats] = normalize(raw);
            if (per_step) per_step->assign(raw.size(), stats);
            return out;
        }
        case NormalizationMode::Online: return normalize_online(raw, per_step);
        case NormalizationMode::None: break;
    }
    if (per_step) per_step->assign(raw.size(), NormalizationStats{});
    return raw;
}

struct NodeBytes {
    std::string node_id;
    std::size_t payload_bytes = 0;  // feature numbers only
    std::size_t wire_bytes = 0;     // full serialized message
};

struct ByteAccounting {
    std::vector<NodeBytes> reports;
    std::size_t query_wire_bytes = 0;
    std::size_t response_payload_bytes = 0;
    std::size_t response_wire_bytes = 0;

    /// Bytes moved to set up fusion at the target: responses plus the query.
    [[nodiscard]] std::size_t setup_wire_bytes() const { return query_wire_bytes + response_wire_bytes; }
};

struct SimulationResult {
    std::vector<NodeReport> nodes;
    PredictionLog log;
    Metrics metrics;
    TimeSeries target;  // as seen by the target node, after normalization
    TimeSeries raw_target;
    std::vector<NormalizationStats> target_stats;  // per step
    ByteAccounting bytes;
    std::vector<TrafficEntry> traffic;
    std::vector<FeatureRecord> registry;
    std::vector<std::string> errors;
    bool target_completed = false;
};

/// Runs every historical node, then the target node, over an in-process
/// channel. Node failures are collected instead of aborting the run.
inline SimulationResult run_simulation(const Scenario &scenario) {
    if (scenario.target.id.empty()) usage_error("scenario target needs an id");
    SimulationResult result;
    FeatureRegistry registry = scenario.registry_store ? FeatureRegistry(*scenario.registry_store) : FeatureRegistry();
    CloudServer server(registry);
    TrafficLog traffic;
    InProcessChannel channel(server, &traffic);

    for (std::size_t i = 0; i < scenario.historical.size(); ++i) {
        const auto &src = scenario.historical[i];
        try {
            const auto raw = load_source(src, derive_seed(scenario.seed, i), scenario.fit.kernel);
            const auto local = apply_normalization(raw, scenario.normalization == NormalizationMode::None
                                                            ? NormalizationMode::None
                                                            : NormalizationMode::Offline);
            FitConfig fit = scenario.fit;
            fit.seed = derive_seed(scenario.seed, 1000 + i);
            result.nodes.push_back(run_historical_node(src.id, local, channel, fit, i + 1));
        } catch (const Error &e) {
            result.errors.push_back(src.id + ": " + e.what());
        }
    }

    try {
        const auto raw = load_source(scenario.target, derive_seed(scenario.seed, scenario.historical.size()),
                                     scenario.fit.kernel);
        result.raw_target = raw;
        result.target = apply_normalization(raw, scenario.normalization, &result.target_stats);
        TargetOptions opts{scenario.limit, scenario.model_ids, scenario.fusion, scenario.fit.kernel};
        auto node = run_target_node(scenario.target.id, result.target, channel, opts);
        result.log = node.log;
        result.metrics = scenario.original_scale
                             ? compute_metrics(to_original_scale(result.log, result.target_stats), raw)
                             : compute_metrics(result.log, result.target);
        result.nodes.push_back(std::move(node));
        result.target_completed = true;
    } catch (const Error &e) {
        result.errors.push_back(scenario.target.id + ": " + e.what());
    }

    result.traffic = traffic.entries();
    result.registry = registry.snapshot();
    for (const auto &e : result.traffic) {
        const auto type = nlohmann::json::parse(e.line).value("type", std::string{});
        if (type == "report") result.bytes.reports.push_back({e.from, kFeaturePayloadBytes, e.line.size()});
        if (type == "query") result.bytes.query_wire_bytes += e.line.size();
        if (type == "response") {
            result.bytes.response_payload_bytes += kFeaturePayloadBytes;
            result.bytes.response_wire_bytes += e.line.size();
        }
    }
    return result;
}

}  // namespace gptdf
