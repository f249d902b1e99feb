#include "aalguard/cli/serve.hpp"

#include <cerrno>
#include <cstring>

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <json.hpp>

#include "aalguard/error.hpp"
#include "aalguard/query.hpp"

namespace aalguard::cli {
namespace {

using json = nlohmann::ordered_json;

constexpr std::size_t kMaxLine = 1 << 20;

json constant_json(const kb::Constant& c) {
    if (c.is_number()) return c.number_value();
    return c.text();
}

std::string error_response(const std::string& message) {
    return json{{"ok", false}, {"error", message}}.dump();
}

const std::string& required_string(const json& req, const char* key) {
    auto it = req.find(key);
    if (it == req.end() || !it->is_string()) {
        throw ValidationError(std::string("field '") + key + "' must be a string");
    }
    return it->get_ref<const std::string&>();
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

json handle_authn(Deployment& d, const json& req) {
    pdp::AuthnRequest r;
    r.user = required_string(req, "user");
    if (auto it = req.find("credential"); it != req.end() && !it->is_null()) {
        if (!it->is_object()) throw ValidationError("field 'credential' must be an object");
        const auto kind = credentials::parse_kind(required_string(*it, "kind"));
        if (!kind) throw ValidationError("credential kind must be password or tag");
        r.credential = pdp::Credential{*kind, required_string(*it, "secret")};
    }
    if (auto it = req.find("features"); it != req.end() && !it->is_null()) {
        if (!it->is_object()) throw ValidationError("field 'features' must be an object");
        for (const auto& [key, value] : it->items()) {
            if (!value.is_number()) throw ValidationError("feature '" + key + "' must be a number");
            r.features.entries[key] = value.get<double>();
            r.features.support[key] = 1;
        }
    } else if (auto p = d.profile_features.find(r.user); p != d.profile_features.end()) {
        r.features = p->second;
    }
    const auto res = query::authn_query(*d.pdp, r.user, r.credential, r.features);
    json out{{"ok", true},
             {"authenticated", res.authenticated ? "yes" : "no"},
             {"mean", res.mean_used},
             {"class", res.behavior_class},
             {"trust", res.trust},
             {"distance", res.distance}};
    if (!res.reason.empty()) out["reason"] = res.reason;
    if (res.audit_error) out["audit_error"] = *res.audit_error;
    return out;
}

json handle_authorize(Deployment& d, const json& req) {
    pdp::AuthzRequest r;
    r.user = required_string(req, "user");
    r.service = required_string(req, "service");
    r.device = optional_string(req, "device");
    if (auto it = req.find("context"); it != req.end() && !it->is_null()) {
        if (!it->is_object()) throw ValidationError("field 'context' must be an object");
        r.context.time = optional_string(*it, "time");
        r.context.location = optional_string(*it, "location");
        r.context.activity = optional_string(*it, "activity");
        r.context.environment = optional_string(*it, "environment");
    }
    const auto dec = query::authz_query(*d.pdp, r.user, r.service, r.device, r.context);
    json out{{"ok", true},
             {"effect", std::string(pdp::to_string(dec.effect))},
             {"obligations", dec.obligations},
             {"recommendations", dec.recommendations},
             {"priority", dec.priority},
             {"rules", dec.rationale}};
    if (dec.audit_error) out["audit_error"] = *dec.audit_error;
    return out;
}

json handle_query(Deployment& d, const json& req) {
    const auto q = query::parse_query(required_string(req, "query"));
    json rows = json::array();
    for (const auto& row : query::eval_query(d.store, q)) {
        json r = json::object();
        for (const auto& var : q.select) r["?" + var] = constant_json(row.at(var));
        rows.push_back(std::move(r));
    }
    return json{{"ok", true}, {"rows", std::move(rows)}};
}

bool send_all(int fd, const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::string RequestHandler::handle(const std::string& line) {
    json req;
    try {
        req = json::parse(line);
    } catch (const json::exception&) {
        return error_response("malformed request: not a JSON object");
    }
    if (!req.is_object()) return error_response("malformed request: not a JSON object");
    try {
        const std::string& op = required_string(req, "op");
        std::lock_guard lock(mu_);
        if (op == "ping") return json{{"ok", true}}.dump();
        if (op == "authn") return handle_authn(d_, req).dump();
        if (op == "authorize") return handle_authorize(d_, req).dump();
        if (op == "query") return handle_query(d_, req).dump();
        return error_response("unknown op '" + op + "'");
    } catch (const json::exception& e) {
        return error_response(std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
        return error_response(e.what());
    }
}

void serve_stream(RequestHandler& handler, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (blank(line)) continue;
        out << handler.handle(line) << '\n' << std::flush;
    }
}

SocketServer::SocketServer(RequestHandler& handler, const std::string& address) : handler_(handler) {
    if (address.rfind("unix:", 0) == 0) {
        unix_path_ = address.substr(5);
        sockaddr_un addr{};
        if (unix_path_.empty() || unix_path_.size() >= sizeof addr.sun_path) {
            throw ValidationError("bad unix socket path '" + unix_path_ + "'");
        }
        addr.sun_family = AF_UNIX;
        std::memcpy(addr.sun_path, unix_path_.c_str(), unix_path_.size() + 1);
        listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
        ::unlink(unix_path_.c_str());
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            const int err = errno;
            ::close(listen_fd_);
            throw IoError("bind " + unix_path_ + ": " + std::strerror(err));
        }
    } else {
        const auto colon = address.rfind(':');
        if (colon == std::string::npos) {
            throw ValidationError("listen address must be '-', unix:<path> or <host>:<port>");
        }
        std::string host = address.substr(0, colon);
        const std::string service = address.substr(colon + 1);
        if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
            host = host.substr(1, host.size() - 2);
        }
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        hints.ai_flags = AI_PASSIVE;
        addrinfo* res = nullptr;
        const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res);
        if (rc != 0) throw ValidationError("cannot resolve '" + address + "': " + ::gai_strerror(rc));
        std::string last_error = "no usable address";
        for (addrinfo* ai = res; ai; ai = ai->ai_next) {
            const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            const int one = 1;
            ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
            if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                listen_fd_ = fd;
                break;
            }
            last_error = std::strerror(errno);
            ::close(fd);
        }
        ::freeaddrinfo(res);
        if (listen_fd_ < 0) throw IoError("bind " + address + ": " + last_error);
        sockaddr_storage bound{};
        socklen_t len = sizeof bound;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        if (bound.ss_family == AF_INET) {
            port_ = ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
        } else if (bound.ss_family == AF_INET6) {
            port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port);
        }
    }
    if (::listen(listen_fd_, 16) != 0) {
        const int err = errno;
        ::close(listen_fd_);
        throw IoError(std::string("listen: ") + std::strerror(err));
    }
}

SocketServer::~SocketServer() {
    stop();
    for (auto& t : workers_) {
        if (t.joinable()) t.join();
    }
    if (!unix_path_.empty()) ::unlink(unix_path_.c_str());
}

void SocketServer::run() {
    while (!stopping_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR && !stopping_) continue;
            break;
        }
        std::lock_guard lock(conn_mu_);
        if (stopping_) {
            ::close(fd);
            break;
        }
        open_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void SocketServer::stop() {
    if (stopping_.exchange(true)) return;
    std::lock_guard lock(conn_mu_);
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
}

void SocketServer::serve_connection(int fd) {
    std::string buffer;
    bool discarding = false;
    char chunk[4096];
    bool alive = true;
    while (alive) {
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
            std::string line = buffer.substr(start, nl - start);
            if (discarding) {
                discarding = false;
                continue;
            }
            if (blank(line)) continue;
            if (!send_all(fd, handler_.handle(line) + "\n")) {
                alive = false;
                break;
            }
        }
        buffer.erase(0, start);
        if (buffer.size() > kMaxLine) {
            buffer.clear();
            if (!discarding) {
                discarding = true;
                if (!send_all(fd, error_response("request line too long") + "\n")) alive = false;
            }
        }
    }
    std::lock_guard lock(conn_mu_);
    open_fds_.remove(fd);
    ::close(fd);
}

}  // namespace aalguard::cli
