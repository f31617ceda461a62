#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "evonas/genotype.hpp"

namespace evonas {

// Down-scaled network the trainer builds for a candidate.
struct ProxyConfig {
    int channels = 36;
    int layers = 14;
    int epochs = 36;

    friend bool operator==(const ProxyConfig&, const ProxyConfig&) = default;
};

struct EvalRequest {
    std::uint64_t id = 0;
    ArchitectureGenotype genotype;
    ProxyConfig proxy;
    std::string dataset = "cifar10";
};

struct EvalResult {
    std::uint64_t id = 0;
    std::optional<double> top1_error;  // set iff the evaluation succeeded
    double train_seconds = 0.0;
    std::string failure;               // "timeout", worker reason, ...

    bool ok() const { return top1_error.has_value(); }
    static EvalResult success(std::uint64_t id, double error, double seconds = 0.0) {
        return {id, error, seconds, {}};
    }
    static EvalResult failed(std::uint64_t id, std::string reason) {
        return {id, std::nullopt, 0.0, std::move(reason)};
    }
};

// Error charged to an architecture whose evaluation failed.
inline constexpr double kFailurePenaltyError = 100.0;

// Raised when the evaluation backend itself is unusable (worker died, pipe
// closed, bad handshake). The search turns it into a resumable abort.
class EvaluatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Evaluator {
public:
    virtual ~Evaluator() = default;
    // One result per request, in request order.
    virtual std::vector<EvalResult> evaluate(std::span<const EvalRequest> batch) = 0;
    virtual std::string name() const = 0;
};

// Synthetic stand-in for trained accuracy. All constants are fixtures:
//   q     = sum of per-op quality over every op slot + beta * loose nodes of
//           the normal block
//   error = e_min + (e_max - e_min) * exp(-q / q0) [+ seeded noise], clipped
//           to [0, 100]
struct SurrogateSpec {
    std::array<double, kNumOps> quality = {
        0.00,  // identity
        0.10,  // max_pool_3x3
        0.10,  // avg_pool_3x3
        0.40,  // squeeze_excite
        0.30,  // lbc_3x3
        0.35,  // lbc_5x5
        0.50,  // dil_conv_3x3
        0.60,  // dil_conv_5x5
        0.70,  // sep_conv_3x3
        0.80,  // sep_conv_5x5
        0.85,  // sep_conv_7x7
        0.75,  // conv_1x7_7x1
    };
    double concat_bonus = 0.2;
    double e_min = 5.0;
    double e_max = 70.0;
    double q0 = 4.0;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
};

double surrogate_quality(const ArchitectureGenotype& g, const SurrogateSpec& spec);
EvalResult synthetic_eval(const ArchitectureGenotype& g, const SurrogateSpec& spec);

class SyntheticEvaluator final : public Evaluator {
public:
    explicit SyntheticEvaluator(SurrogateSpec spec = {}, int width = 1);
    std::vector<EvalResult> evaluate(std::span<const EvalRequest> batch) override;
    std::string name() const override { return "synthetic"; }

    std::uint64_t calls() const { return calls_; }

private:
    SurrogateSpec spec_;
    int width_;
    std::uint64_t calls_ = 0;
};

// Line-delimited JSON messages exchanged with trainer workers.
namespace wire {

inline constexpr int kProtocolVersion = 1;

struct Ready {
    std::vector<std::string> caps;
};
struct Result {
    std::uint64_t id;
    double top1_error;
    double train_seconds;
};
struct Error {
    std::uint64_t id;
    std::string reason;
};
struct Unknown {
    std::string type;
};
using Message = std::variant<Ready, Result, Error, Unknown>;

std::string encode_hello();
std::string encode_request(const EvalRequest& req);
// Throws std::invalid_argument on text that is not a JSON object with a
// string "type" or whose known message misses required fields.
Message decode(std::string_view line);

}  // namespace wire

struct ExternalOptions {
    std::string command;  // run through /bin/sh -c
    int workers = 1;
    // A worker that stays silent this long with work outstanding fails all
    // of its outstanding requests with "timeout".
    std::chrono::milliseconds request_timeout{std::chrono::hours(1)};
    std::chrono::milliseconds handshake_timeout{std::chrono::seconds(30)};
};

class WorkerProcess;

// Delegates evaluation to external trainer processes over stdin/stdout.
// Requests are dealt round-robin across workers and matched back by id.
class ExternalEvaluator final : public Evaluator {
public:
    explicit ExternalEvaluator(ExternalOptions options);
    ~ExternalEvaluator() override;
    ExternalEvaluator(const ExternalEvaluator&) = delete;
    ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

    std::vector<EvalResult> evaluate(std::span<const EvalRequest> batch) override;
    std::string name() const override { return "external:" + options_.command; }

    const std::vector<std::string>& capabilities() const { return caps_; }

private:
    ExternalOptions options_;
    std::vector<std::unique_ptr<WorkerProcess>> workers_;
    std::vector<std::string> caps_;
};

// Successful results keyed by genotype digest.
class EvalCache {
public:
    EvalCache() = default;
    // The mutex is not carried over; moving a cache in use is a bug.
    EvalCache(EvalCache&& other) noexcept : entries_(std::move(other.entries_)) {}
    EvalCache& operator=(EvalCache&& other) noexcept {
        entries_ = std::move(other.entries_);
        return *this;
    }

    std::optional<EvalResult> lookup(const Digest& d) const;
    // Failed results are never stored.
    void store(const Digest& d, const EvalResult& r);
    std::size_t size() const;

private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<Digest, EvalResult, DigestHash> entries_;
};

EvalResult cached_eval(const ArchitectureGenotype& g, Evaluator& backend, EvalCache& cache,
                       std::uint64_t request_id = 0);

}  // namespace evonas
