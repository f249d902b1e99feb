#pragma once

// Newline-delimited JSON request loop over stdio, a unix socket or TCP.
//   request:  {"op":"ping"|"authn"|"authorize"|"query", ...}
//   response: {"ok":true, ...payload} or {"ok":false,"error":"..."}

#include <atomic>
#include <cstdint>
#include <istream>
#include <list>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "aalguard/cli/scenario.hpp"

namespace aalguard::cli {

// Decodes one request line and evaluates it against a deployment. All
// evaluation is serialized on one mutex so the decision point stays single-writer.
class RequestHandler {
public:
    explicit RequestHandler(Deployment& deployment) : d_(deployment) {}

    // Never throws; malformed input produces an error response.
    std::string handle(const std::string& line);

private:
    Deployment& d_;
    std::mutex mu_;
};

// Reads until EOF, one response line per non-empty request line, flushed.
void serve_stream(RequestHandler& handler, std::istream& in, std::ostream& out);

// `unix:<path>` or `<host>:<port>`; port 0 picks an ephemeral port.
class SocketServer {
public:
    SocketServer(RequestHandler& handler, const std::string& address);
    ~SocketServer();
    SocketServer(const SocketServer&) = delete;
    SocketServer& operator=(const SocketServer&) = delete;

    // Bound TCP port, 0 for unix sockets.
    std::uint16_t port() const noexcept { return port_; }

    // Accepts until stop(); one thread per connection.
    void run();
    void stop();

private:
    void serve_connection(int fd);

    RequestHandler& handler_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::string unix_path_;
    std::atomic<bool> stopping_{false};
    std::mutex conn_mu_;
    std::list<int> open_fds_;
    std::list<std::thread> workers_;
};

}  // namespace aalguard::cli
