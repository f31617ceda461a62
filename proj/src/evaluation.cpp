#include "evonas/evaluation.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <map>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace evonas {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double surrogate_quality(const ArchitectureGenotype& g, const SurrogateSpec& spec) {
    double q = 0.0;
    for (const BlockGenotype* b : {&g.normal, &g.reduction}) {
        for (const NodeGene& n : b->nodes) {
            q += spec.quality.at(static_cast<std::size_t>(n.op1));
            q += spec.quality.at(static_cast<std::size_t>(n.op2));
        }
    }
    q += spec.concat_bonus * static_cast<double>(loose_nodes(g.normal).size());
    return q;
}

EvalResult synthetic_eval(const ArchitectureGenotype& g, const SurrogateSpec& spec) {
    const double q = surrogate_quality(g, spec);
    double error = spec.e_min + (spec.e_max - spec.e_min) * std::exp(-q / spec.q0);
    if (spec.noise_sigma > 0.0) {
        const Digest d = canonical_hash(g);
        std::uint64_t seed = 0;
        std::memcpy(&seed, d.bytes.data(), sizeof(seed));
        Rng noise(seed ^ spec.noise_seed);
        error += spec.noise_sigma * noise.normal();
    }
    return EvalResult::success(0, std::clamp(error, 0.0, 100.0));
}

SyntheticEvaluator::SyntheticEvaluator(SurrogateSpec spec, int width)
    : spec_(std::move(spec)), width_(std::max(1, width)) {}

std::vector<EvalResult> SyntheticEvaluator::evaluate(std::span<const EvalRequest> batch) {
    std::vector<EvalResult> out(batch.size());
    auto run = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < batch.size(); i += step) {
            out[i] = synthetic_eval(batch[i].genotype, spec_);
            out[i].id = batch[i].id;
        }
    };
    const auto lanes = std::min<std::size_t>(static_cast<std::size_t>(width_), batch.size());
    if (lanes <= 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < lanes; ++t) pool.emplace_back(run, t, lanes);
        for (auto& th : pool) th.join();
    }
    calls_ += batch.size();
    return out;
}

namespace wire {

std::string encode_hello() {
    return json{{"type", "hello"}, {"proto", kProtocolVersion}}.dump();
}

std::string encode_request(const EvalRequest& req) {
    json j;
    j["type"] = "eval";
    j["id"] = req.id;
    j["genotype"] = serialize(req.genotype);
    j["proxy"] = {{"channels", req.proxy.channels},
                  {"layers", req.proxy.layers},
                  {"epochs", req.proxy.epochs}};
    j["dataset"] = req.dataset;
    return j.dump();
}

Message decode(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("malformed message: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw std::invalid_argument("message lacks a string \"type\"");
    }
    const std::string type = j["type"];
    try {
        if (type == "ready") {
            Ready r;
            if (j.contains("caps")) r.caps = j["caps"].get<std::vector<std::string>>();
            return r;
        }
        if (type == "result") {
            return Result{j.at("id").get<std::uint64_t>(), j.at("top1_error").get<double>(),
                          j.value("train_seconds", 0.0)};
        }
        if (type == "error") {
            return Error{j.at("id").get<std::uint64_t>(), j.value("reason", std::string("unspecified"))};
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument("malformed " + type + " message: " + e.what());
    }
    return Unknown{type};
}

}  // namespace wire

class WorkerProcess {
public:
    explicit WorkerProcess(const std::string& command) {
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0) throw EvaluatorError("pipe failed: " + std::string(std::strerror(errno)));
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw EvaluatorError("pipe failed: " + std::string(std::strerror(errno)));
        }
        pid_ = fork();
        if (pid_ < 0) throw EvaluatorError("fork failed: " + std::string(std::strerror(errno)));
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
        fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
        fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
        fcntl(write_fd_, F_SETFL, fcntl(write_fd_, F_GETFL) | O_NONBLOCK);
        fcntl(read_fd_, F_SETFL, fcntl(read_fd_, F_GETFL) | O_NONBLOCK);
    }

    ~WorkerProcess() {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        if (pid_ > 0) {
            // Closing stdin asks the worker to exit; give it a moment.
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid_, nullptr, WNOHANG) != 0) return;
                std::this_thread::sleep_for(std::chrono::milliseconds(10));
            }
            kill(pid_, SIGKILL);
            waitpid(pid_, nullptr, 0);
        }
    }

    WorkerProcess(const WorkerProcess&) = delete;
    WorkerProcess& operator=(const WorkerProcess&) = delete;

    int read_fd() const { return read_fd_; }
    int write_fd() const { return write_fd_; }

    void queue(const std::string& line) { outbox_ += line + '\n'; }
    bool has_outbox() const { return !outbox_.empty(); }

    // Writes as much queued output as the pipe accepts.
    void flush_some() {
        while (!outbox_.empty()) {
            const ssize_t n = write(write_fd_, outbox_.data(), outbox_.size());
            if (n < 0) {
                if (errno == EAGAIN || errno == EWOULDBLOCK) return;
                if (errno == EINTR) continue;
                throw EvaluatorError("worker pipe closed: " + std::string(std::strerror(errno)));
            }
            outbox_.erase(0, static_cast<std::size_t>(n));
        }
    }

    bool eof() const { return eof_; }

    // Reads what is available and returns the complete lines.
    std::vector<std::string> read_lines() {
        char buf[4096];
        for (;;) {
            const ssize_t n = read(read_fd_, buf, sizeof(buf));
            if (n > 0) {
                inbox_.append(buf, static_cast<std::size_t>(n));
                continue;
            }
            if (n == 0) {
                eof_ = true;
                break;
            }
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            throw EvaluatorError("worker read failed: " + std::string(std::strerror(errno)));
        }
        std::vector<std::string> lines;
        std::size_t pos;
        while ((pos = inbox_.find('\n')) != std::string::npos) {
            std::string line = inbox_.substr(0, pos);
            inbox_.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) lines.push_back(std::move(line));
        }
        return lines;
    }

    // Blocks until one line arrives or the deadline passes.
    std::optional<std::string> read_line(Clock::time_point deadline) {
        for (;;) {
            auto lines = read_lines();
            if (!lines.empty()) {
                // Re-queue anything beyond the first line.
                for (std::size_t i = lines.size(); i-- > 1;) inbox_.insert(0, lines[i] + '\n');
                return lines.front();
            }
            if (eof_) throw EvaluatorError("worker exited during the handshake");
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            if (left.count() <= 0) return std::nullopt;
            pollfd p{read_fd_, POLLIN, 0};
            poll(&p, 1, static_cast<int>(left.count()));
        }
    }

private:
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string outbox_;
    std::string inbox_;
    bool eof_ = false;
};

ExternalEvaluator::ExternalEvaluator(ExternalOptions options) : options_(std::move(options)) {
    if (options_.command.empty()) throw std::invalid_argument("external evaluator needs a command");
    std::signal(SIGPIPE, SIG_IGN);
    const int count = std::max(1, options_.workers);
    for (int w = 0; w < count; ++w) {
        auto worker = std::make_unique<WorkerProcess>(options_.command);
        worker->queue(wire::encode_hello());
        const auto deadline = Clock::now() + options_.handshake_timeout;
        while (worker->has_outbox()) {
            worker->flush_some();
            if (Clock::now() > deadline) throw EvaluatorError("handshake timed out");
        }
        for (;;) {
            auto line = worker->read_line(deadline);
            if (!line) throw EvaluatorError("worker did not answer the handshake");
            wire::Message msg;
            try {
                msg = wire::decode(*line);
            } catch (const std::invalid_argument& e) {
                throw EvaluatorError(std::string("bad handshake reply: ") + e.what());
            }
            if (auto* ready = std::get_if<wire::Ready>(&msg)) {
                if (caps_.empty()) caps_ = ready->caps;
                break;
            }
        }
        workers_.push_back(std::move(worker));
    }
}

ExternalEvaluator::~ExternalEvaluator() = default;

std::vector<EvalResult> ExternalEvaluator::evaluate(std::span<const EvalRequest> batch) {
    std::vector<EvalResult> out(batch.size());
    std::vector<bool> done(batch.size(), false);
    const std::size_t nw = workers_.size();
    // Outstanding request ids per worker -> batch index.
    std::vector<std::map<std::uint64_t, std::size_t>> outstanding(nw);
    std::vector<Clock::time_point> last_activity(nw, Clock::now());

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::size_t w = i % nw;
        if (!outstanding[w].emplace(batch[i].id, i).second) {
            throw std::invalid_argument("duplicate request id in batch");
        }
        workers_[w]->queue(wire::encode_request(batch[i]));
    }

    auto remaining = [&] {
        std::size_t r = 0;
        for (const auto& o : outstanding) r += o.size();
        return r;
    };

    while (remaining() > 0) {
        std::vector<pollfd> fds;
        std::vector<std::size_t> owner;
        for (std::size_t w = 0; w < nw; ++w) {
            if (outstanding[w].empty()) continue;
            fds.push_back({workers_[w]->read_fd(), POLLIN, 0});
            owner.push_back(w);
            if (workers_[w]->has_outbox()) {
                fds.push_back({workers_[w]->write_fd(), POLLOUT, 0});
                owner.push_back(w);
            }
        }
        auto now = Clock::now();
        auto wait = options_.request_timeout;
        for (std::size_t w = 0; w < nw; ++w) {
            if (outstanding[w].empty()) continue;
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                last_activity[w] + options_.request_timeout - now);
            wait = std::min(wait, std::max(left, std::chrono::milliseconds(0)));
        }
        const int ready = poll(fds.data(), fds.size(), static_cast<int>(wait.count()) + 1);
        if (ready < 0 && errno != EINTR) {
            throw EvaluatorError("poll failed: " + std::string(std::strerror(errno)));
        }
        for (std::size_t k = 0; k < fds.size(); ++k) {
            const std::size_t w = owner[k];
            if (fds[k].revents == 0) continue;
            if (fds[k].fd == workers_[w]->write_fd()) {
                if (fds[k].revents & (POLLERR | POLLHUP)) throw EvaluatorError("worker pipe closed");
                workers_[w]->flush_some();
                continue;
            }
            for (const auto& line : workers_[w]->read_lines()) {
                wire::Message msg;
                try {
                    msg = wire::decode(line);
                } catch (const std::invalid_argument&) {
                    continue;  // not a protocol message
                }
                std::optional<std::uint64_t> id;
                EvalResult r;
                if (auto* res = std::get_if<wire::Result>(&msg)) {
                    id = res->id;
                    r = EvalResult::success(res->id, std::clamp(res->top1_error, 0.0, 100.0),
                                            res->train_seconds);
                } else if (auto* err = std::get_if<wire::Error>(&msg)) {
                    id = err->id;
                    r = EvalResult::failed(err->id, err->reason);
                }
                if (!id) continue;
                const auto it = outstanding[w].find(*id);
                if (it == outstanding[w].end()) continue;  // stale or foreign id
                out[it->second] = r;
                done[it->second] = true;
                outstanding[w].erase(it);
                last_activity[w] = Clock::now();
            }
            if (workers_[w]->eof() && !outstanding[w].empty()) {
                throw EvaluatorError("worker exited with requests outstanding");
            }
        }
        now = Clock::now();
        for (std::size_t w = 0; w < nw; ++w) {
            if (outstanding[w].empty()) continue;
            if (now - last_activity[w] < options_.request_timeout) continue;
            for (const auto& [id, idx] : outstanding[w]) {
                out[idx] = EvalResult::failed(id, "timeout");
                done[idx] = true;
            }
            outstanding[w].clear();
        }
    }
    return out;
}

std::optional<EvalResult> EvalCache::lookup(const Digest& d) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(d);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EvalCache::store(const Digest& d, const EvalResult& r) {
    if (!r.ok()) return;
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(d, r);
}

std::size_t EvalCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

EvalResult cached_eval(const ArchitectureGenotype& g, Evaluator& backend, EvalCache& cache,
                       std::uint64_t request_id) {
    const Digest d = canonical_hash(g);
    if (auto hit = cache.lookup(d)) {
        hit->id = request_id;
        return *hit;
    }
    EvalRequest req;
    req.id = request_id;
    req.genotype = g;
    auto results = backend.evaluate(std::span<const EvalRequest>(&req, 1));
    cache.store(d, results.at(0));
    return results.at(0);
}

}  // namespace evonas
