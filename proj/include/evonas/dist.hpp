#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "evonas/evaluator.hpp"

namespace evonas {

// ---------------------------------------------------------------------------
// Wire protocol: newline-delimited UTF-8 lines of space-separated key=value
// pairs with a leading `type`. Values carry no spaces. Versioned by
// config_hash carried in HELLO and JOB records.
// ---------------------------------------------------------------------------

namespace wire {

using Record = std::map<std::string, std::string>;

inline std::string encode(const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string line;
    for (const auto& [k, v] : fields) {
        if (!line.empty()) line += ' ';
        line += k + '=' + v;
    }
    line += '\n';
    return line;
}

inline Record decode(const std::string& line) {
    Record r;
    for (const auto& part : split(trim(line), ' ')) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ParseError("bad wire field '" + part + "'");
        r[part.substr(0, eq)] = part.substr(eq + 1);
    }
    if (!r.count("type")) throw ParseError("wire record lacks a type");
    return r;
}

inline std::string job_line(const EvalJob& job, const std::string& config_hash) {
    return encode({{"type", "JOB"},
                   {"job_id", std::to_string(job.job_id)},
                   {"individual_id", std::to_string(job.individual_id)},
                   {"encoding", job.encoding.str()},
                   {"seed", std::to_string(job.rng_seed)},
                   {"config_hash", config_hash}});
}

inline EvalJob parse_job(const Record& r) {
    EvalJob job;
    job.job_id = parse_int(r.at("job_id"), "job_id");
    job.individual_id = parse_int(r.at("individual_id"), "individual_id");
    job.encoding = Encoding::parse(r.at("encoding"));
    job.rng_seed = parse_uint(r.at("seed"), "seed");
    return job;
}

inline std::string result_line(const EvalOutcome& o) {
    return encode({{"type", "RESULT"},
                   {"job_id", std::to_string(o.job_id)},
                   {"individual_id", std::to_string(o.individual_id)},
                   {"status", o.ok ? "ok" : "failed"},
                   {"introspectability", fmt_g(o.objectives.introspectability, 17)},
                   {"accuracy", fmt_g(o.objectives.accuracy, 17)},
                   {"train_accuracy", fmt_g(o.metrics.train_accuracy, 17)},
                   {"param_count", std::to_string(o.metrics.param_count)},
                   {"train_seconds", fmt_g(o.metrics.train_seconds, 17)},
                   {"profile", o.profile_ref.empty() ? "-" : o.profile_ref}});
}

inline EvalOutcome parse_result(const Record& r) {
    EvalOutcome o;
    o.job_id = parse_int(r.at("job_id"), "job_id");
    o.individual_id = parse_int(r.at("individual_id"), "individual_id");
    o.ok = r.at("status") == "ok";
    o.objectives.introspectability = parse_double(r.at("introspectability"), "introspectability");
    o.objectives.accuracy = parse_double(r.at("accuracy"), "accuracy");
    o.metrics.train_accuracy = parse_double(r.at("train_accuracy"), "train_accuracy");
    o.metrics.validation_accuracy = o.objectives.accuracy;
    o.metrics.param_count = parse_int(r.at("param_count"), "param_count");
    o.metrics.train_seconds = parse_double(r.at("train_seconds"), "train_seconds");
    if (r.at("profile") != "-") o.profile_ref = r.at("profile");
    return o;
}

}  // namespace wire

// ---------------------------------------------------------------------------
// Socket plumbing.
// ---------------------------------------------------------------------------

namespace net {

struct Address {
    std::string host;
    std::uint16_t port = 0;
};

inline Address parse_address(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw ValidationError("address must be host:port, got '" + s + "'");
    Address a;
    a.host = s.substr(0, colon);
    a.port = static_cast<std::uint16_t>(parse_int(s.substr(colon + 1), "port"));
    return a;
}

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept {
        close_fd();
        fd_ = o.fd_;
        o.fd_ = -1;
        return *this;
    }
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

    void shutdown_and_close() {
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
        close_fd();
    }

    bool send_all(const std::string& data) {
        size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n <= 0) return false;
            off += static_cast<size_t>(n);
        }
        return true;
    }

    /// Blocking line read (without the newline); nullopt on EOF/error.
    std::optional<std::string> read_line() {
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
            if (n <= 0) return std::nullopt;
            buffer_.append(chunk, static_cast<size_t>(n));
        }
    }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
    std::string buffer_;
};

inline Socket connect_to(const Address& addr) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw IoError("socket() failed");
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(addr.port);
    if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
        ::close(fd);
        throw IoError("bad IPv4 address '" + addr.host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        ::close(fd);
        throw IoError("connect to " + addr.host + ":" + std::to_string(addr.port) + " failed");
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

struct Listener {
    Socket sock;
    std::uint16_t port = 0;
};

inline Listener listen_on(const Address& addr) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw IoError("socket() failed");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(addr.port);
    if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
        ::close(fd);
        throw IoError("bad IPv4 address '" + addr.host + "'");
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        ::close(fd);
        throw IoError("bind to " + addr.host + ":" + std::to_string(addr.port) + " failed");
    }
    if (::listen(fd, 16) != 0) {
        ::close(fd);
        throw IoError("listen failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    return Listener{Socket(fd), ntohs(bound.sin_port)};
}

}  // namespace net

// ---------------------------------------------------------------------------
// Master: accepts workers, dispatches one job per free slot, requeues jobs of
// dead or silent workers, and delivers each result to the search loop exactly
// once (late duplicates are dropped by job id).
// ---------------------------------------------------------------------------

struct MasterOptions {
    net::Address bind{"127.0.0.1", 0};
    std::string config_hash;
    /// Local evaluation slots on the head node; 0 disables the head worker.
    int head_slots = 0;
    int job_deadline_ms = 10 * 60 * 1000;
    std::ostream* log = nullptr;
};

/// A single evaluation; EvalTask::run bound to a task instance in production,
/// anything callable in tests.
using TaskFn = std::function<EvalOutcome(const EvalJob&)>;

class MasterService {
public:
    explicit MasterService(MasterOptions opts, TaskFn head_task = {})
        : opts_(std::move(opts)), head_task_(std::move(head_task)) {}

    ~MasterService() { stop(); }

    void start() {
        listener_ = net::listen_on(opts_.bind);
        port_ = listener_.port;
        acceptor_ = std::thread([this] { accept_loop(); });
        monitor_ = std::thread([this] { monitor_loop(); });
        if (opts_.head_slots > 0 && head_task_)
            for (int i = 0; i < opts_.head_slots; ++i)
                head_workers_.emplace_back([this] { head_loop(); });
        log("master listening on " + opts_.bind.host + ":" + std::to_string(port_));
    }

    std::uint16_t port() const { return port_; }

    void stop() {
        {
            std::lock_guard lk(mu_);
            if (stopping_) return;
            stopping_ = true;
            for (auto& [id, conn] : conns_)
                if (conn->alive) conn->sock.send_all(wire::encode({{"type", "BYE"}}));
        }
        cv_.notify_all();
        listener_.sock.shutdown_and_close();
        {
            std::lock_guard lk(mu_);
            for (auto& [id, conn] : conns_) conn->sock.shutdown_and_close();
        }
        if (acceptor_.joinable()) acceptor_.join();
        if (monitor_.joinable()) monitor_.join();
        for (auto& t : head_workers_)
            if (t.joinable()) t.join();
        for (auto& t : readers_)
            if (t.joinable()) t.join();
    }

    /// Blocking batch evaluation; returns once every job has exactly one result.
    std::vector<EvalOutcome> evaluate(const std::vector<EvalJob>& jobs) {
        {
            std::lock_guard lk(mu_);
            for (const auto& job : jobs) {
                if (!submitted_ids_.insert_check(job.job_id))
                    throw SearchError("duplicate job id " + std::to_string(job.job_id));
                pending_.push_back(job);
                outstanding_.insert(job.job_id);
            }
            dispatch_all_locked();
        }
        cv_.notify_all();
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return outstanding_.empty() || stopping_; });
        if (!outstanding_.empty()) throw SearchError("master stopped with jobs outstanding");
        std::vector<EvalOutcome> out;
        out.reserve(jobs.size());
        for (const auto& job : jobs) {
            auto it = results_.find(job.job_id);
            if (it == results_.end())
                throw SearchError("missing result for job " + std::to_string(job.job_id));
            out.push_back(it->second);
        }
        results_.clear();
        return out;
    }

    int live_workers() {
        std::lock_guard lk(mu_);
        int n = 0;
        for (auto& [id, conn] : conns_)
            if (conn->alive) ++n;
        return n;
    }

private:
    using Clock = std::chrono::steady_clock;

    struct Conn {
        int id = 0;
        net::Socket sock;
        int slots = 1;
        int heartbeat_ms = 5000;
        Clock::time_point last_heartbeat = Clock::now();
        std::set<std::int64_t> in_flight;
        bool alive = true;
    };

    /// Remembers every job id ever submitted; re-submission is a bug.
    struct SubmittedIds {
        std::set<std::int64_t> ids;
        bool insert_check(std::int64_t id) { return ids.insert(id).second; }
    };

    void log(const std::string& msg) {
        if (opts_.log) *opts_.log << "[master] " << msg << "\n";
    }

    void accept_loop() {
        for (;;) {
            const int fd = ::accept(listener_.sock.fd(), nullptr, nullptr);
            if (fd < 0) return;  // listener closed
            std::lock_guard lk(mu_);
            if (stopping_) {
                ::close(fd);
                return;
            }
            const int id = next_conn_id_++;
            auto conn = std::make_unique<Conn>();
            conn->id = id;
            conn->sock = net::Socket(fd);
            auto* raw = conn.get();
            conns_.emplace(id, std::move(conn));
            readers_.emplace_back([this, raw] { reader_loop(raw); });
        }
    }

    void reader_loop(Conn* conn) {
        // Handshake.
        auto hello = conn->sock.read_line();
        bool accepted = false;
        if (hello) {
            try {
                auto r = wire::decode(*hello);
                if (r.at("type") == "HELLO" && r.at("config_hash") == opts_.config_hash) {
                    std::lock_guard lk(mu_);
                    conn->slots = std::max(1, static_cast<int>(parse_int(r.at("slots"), "slots")));
                    conn->heartbeat_ms =
                        std::max(10, static_cast<int>(parse_int(r.at("heartbeat_ms"), "heartbeat_ms")));
                    conn->last_heartbeat = Clock::now();
                    accepted = conn->sock.send_all(wire::encode({{"type", "WELCOME"}}));
                    if (accepted) {
                        log("worker " + std::to_string(conn->id) + " joined with " +
                            std::to_string(conn->slots) + " slot(s)");
                        dispatch_all_locked();
                    }
                } else {
                    conn->sock.send_all(
                        wire::encode({{"type", "REJECT"}, {"reason", "config_hash_mismatch"}}));
                    log("rejected worker with mismatched config hash");
                }
            } catch (const std::exception& ex) {
                log(std::string("handshake error: ") + ex.what());
            }
        }
        if (!accepted) {
            std::lock_guard lk(mu_);
            drop_worker_locked(conn);
            return;
        }
        for (;;) {
            auto line = conn->sock.read_line();
            if (!line) break;
            if (line->empty()) continue;
            try {
                auto r = wire::decode(*line);
                const auto& type = r.at("type");
                std::lock_guard lk(mu_);
                if (type == "RESULT") {
                    handle_result_locked(conn, wire::parse_result(r));
                } else if (type == "HEARTBEAT") {
                    conn->last_heartbeat = Clock::now();
                } else if (type == "BYE") {
                    break;
                }
            } catch (const std::exception& ex) {
                log(std::string("bad message from worker: ") + ex.what());
            }
        }
        std::lock_guard lk(mu_);
        drop_worker_locked(conn);
        cv_.notify_all();
    }

    void handle_result_locked(Conn* conn, EvalOutcome outcome) {
        conn->last_heartbeat = Clock::now();
        conn->in_flight.erase(outcome.job_id);
        assigned_.erase(outcome.job_id);
        if (!outstanding_.count(outcome.job_id)) return;  // duplicate from a retried job
        outstanding_.erase(outcome.job_id);
        results_[outcome.job_id] = std::move(outcome);
        dispatch_all_locked();
        cv_.notify_all();
    }

    void drop_worker_locked(Conn* conn) {
        if (!conn->alive) return;
        conn->alive = false;
        conn->sock.shutdown_and_close();
        if (!conn->in_flight.empty()) {
            log("worker " + std::to_string(conn->id) + " lost; requeueing " +
                std::to_string(conn->in_flight.size()) + " job(s)");
            for (auto job_id : conn->in_flight) {
                auto it = assigned_.find(job_id);
                if (it == assigned_.end()) continue;
                pending_.push_front(it->second.job);
                assigned_.erase(it);
            }
            conn->in_flight.clear();
            dispatch_all_locked();
        }
    }

    void dispatch_all_locked() {
        for (auto& [id, conn] : conns_) {
            if (!conn->alive) continue;
            while (!pending_.empty() &&
                   static_cast<int>(conn->in_flight.size()) < conn->slots) {
                EvalJob job = pending_.front();
                if (!conn->sock.send_all(wire::job_line(job, opts_.config_hash))) {
                    drop_worker_locked(conn.get());
                    break;
                }
                pending_.pop_front();
                conn->in_flight.insert(job.job_id);
                assigned_[job.job_id] = {job, conn->id, Clock::now()};
            }
        }
    }

    void monitor_loop() {
        for (;;) {
            {
                std::unique_lock lk(mu_);
                if (cv_.wait_for(lk, std::chrono::milliseconds(25), [&] { return stopping_; })) return;
                const auto now = Clock::now();
                std::vector<Conn*> dead;
                for (auto& [id, conn] : conns_) {
                    if (!conn->alive) continue;
                    const auto silence =
                        std::chrono::duration_cast<std::chrono::milliseconds>(now - conn->last_heartbeat)
                            .count();
                    if (silence > 3LL * conn->heartbeat_ms) dead.push_back(conn.get());
                }
                for (auto* conn : dead) {
                    log("worker " + std::to_string(conn->id) + " missed heartbeats; dropping");
                    drop_worker_locked(conn);
                }
                // A job past its deadline implies a stuck worker: drop the
                // worker first so the job is never live in two places.
                std::vector<Conn*> stuck;
                for (auto& [job_id, a] : assigned_) {
                    const auto age =
                        std::chrono::duration_cast<std::chrono::milliseconds>(now - a.since).count();
                    if (age > opts_.job_deadline_ms) {
                        auto it = conns_.find(a.conn_id);
                        if (it != conns_.end() && it->second->alive) stuck.push_back(it->second.get());
                    }
                }
                for (auto* conn : stuck) {
                    log("worker " + std::to_string(conn->id) + " exceeded the job deadline; dropping");
                    drop_worker_locked(conn);
                }
                cv_.notify_all();
            }
        }
    }

    void head_loop() {
        for (;;) {
            EvalJob job;
            {
                std::unique_lock lk(mu_);
                cv_.wait(lk, [&] { return stopping_ || !pending_.empty(); });
                if (stopping_) return;
                job = pending_.front();
                pending_.pop_front();
                assigned_[job.job_id] = {job, -1, Clock::now()};
            }
            EvalOutcome outcome = head_task_(job);
            {
                std::lock_guard lk(mu_);
                assigned_.erase(outcome.job_id);
                if (outstanding_.count(outcome.job_id)) {
                    outstanding_.erase(outcome.job_id);
                    results_[outcome.job_id] = std::move(outcome);
                }
            }
            cv_.notify_all();
        }
    }

    struct Assignment {
        EvalJob job;
        int conn_id = -1;  // -1 = head worker
        Clock::time_point since;
    };

    MasterOptions opts_;
    TaskFn head_task_;
    net::Listener listener_;
    std::uint16_t port_ = 0;

    std::mutex mu_;
    std::condition_variable cv_;
    bool stopping_ = false;
    int next_conn_id_ = 0;
    std::map<int, std::unique_ptr<Conn>> conns_;
    std::deque<EvalJob> pending_;
    std::map<std::int64_t, Assignment> assigned_;
    std::set<std::int64_t> outstanding_;
    std::map<std::int64_t, EvalOutcome> results_;
    SubmittedIds submitted_ids_;
    std::thread acceptor_, monitor_;
    std::vector<std::thread> head_workers_;
    std::vector<std::thread> readers_;
};

// ---------------------------------------------------------------------------
// Worker: registers, pulls up to `slots` jobs concurrently, streams results,
// heartbeats. Exits nonzero when the master is unreachable or rejects it.
// ---------------------------------------------------------------------------

struct WorkerOptions {
    net::Address master;
    int slots = 1;
    int heartbeat_ms = 5000;
    std::string config_hash;
    int connect_attempts = 6;  // bounded exponential backoff
    std::ostream* log = nullptr;
};

inline int worker_run(const WorkerOptions& opts, const TaskFn& task) {
    auto log = [&](const std::string& msg) {
        if (opts.log) *opts.log << "[worker] " << msg << "\n";
    };
    net::Socket sock;
    int delay_ms = 250;
    for (int attempt = 0; attempt < opts.connect_attempts; ++attempt) {
        try {
            sock = net::connect_to(opts.master);
            break;
        } catch (const IoError& ex) {
            log(std::string(ex.what()) + "; retrying in " + std::to_string(delay_ms) + " ms");
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = std::min(delay_ms * 2, 8000);
        }
    }
    if (!sock.valid()) {
        log("master unreachable, giving up");
        return 3;
    }
    sock.send_all(wire::encode({{"type", "HELLO"},
                                {"config_hash", opts.config_hash},
                                {"slots", std::to_string(opts.slots)},
                                {"heartbeat_ms", std::to_string(opts.heartbeat_ms)}}));
    auto reply = sock.read_line();
    if (!reply) {
        log("master closed during handshake");
        return 3;
    }
    {
        auto r = wire::decode(*reply);
        if (r.at("type") != "WELCOME") {
            log("rejected by master: " + (r.count("reason") ? r.at("reason") : std::string("?")));
            return 4;
        }
    }
    log("registered with " + std::to_string(opts.slots) + " slot(s)");

    std::mutex mu;
    std::condition_variable cv;
    std::deque<EvalJob> queue;
    bool done = false;

    auto send_line = [&](const std::string& line) {
        std::lock_guard lk(mu);
        return sock.send_all(line);
    };

    std::thread heartbeat([&] {
        for (;;) {
            {
                std::unique_lock lk(mu);
                if (cv.wait_for(lk, std::chrono::milliseconds(opts.heartbeat_ms),
                                [&] { return done; }))
                    return;
                if (!sock.send_all(wire::encode({{"type", "HEARTBEAT"}}))) return;
            }
        }
    });

    std::vector<std::thread> runners;
    for (int i = 0; i < opts.slots; ++i) {
        runners.emplace_back([&] {
            for (;;) {
                EvalJob job;
                {
                    std::unique_lock lk(mu);
                    cv.wait(lk, [&] { return done || !queue.empty(); });
                    if (queue.empty()) return;  // done
                    job = queue.front();
                    queue.pop_front();
                }
                EvalOutcome outcome = task(job);
                send_line(wire::result_line(outcome));
            }
        });
    }

    int rc = 0;
    for (;;) {
        auto line = sock.read_line();
        if (!line) break;
        if (line->empty()) continue;
        try {
            auto r = wire::decode(*line);
            const auto& type = r.at("type");
            if (type == "JOB") {
                if (r.at("config_hash") != opts.config_hash) {
                    log("job with mismatched config hash; refusing");
                    rc = 4;
                    break;
                }
                {
                    std::lock_guard lk(mu);
                    queue.push_back(wire::parse_job(r));
                }
                cv.notify_all();
            } else if (type == "BYE") {
                break;
            }
        } catch (const std::exception& ex) {
            // Protocol violations are fatal: dying lets the master requeue the
            // in-flight jobs on a healthy worker instead of stalling.
            log(std::string("bad message: ") + ex.what());
            rc = 3;
            break;
        }
    }
    {
        std::lock_guard lk(mu);
        done = true;
    }
    cv.notify_all();
    for (auto& t : runners) t.join();
    heartbeat.join();
    log("exiting");
    return rc;
}

}  // namespace evonas
