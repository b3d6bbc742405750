#include "gcrl/net.hpp"

#include <arpa/inet.h>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <vector>

#include "gcrl/errors.hpp"

namespace gcrl::net {

namespace {

// A write to a dead peer must surface as send failure, not SIGPIPE.
void ignore_sigpipe_once() {
    static const bool done = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

// Buffered line reader/writer over a pair of file descriptors.
class FdChannel : public LineChannel {
public:
    FdChannel(int read_fd, int write_fd, pid_t child = -1, bool owns_fds = true)
        : read_fd_(read_fd), write_fd_(write_fd), child_(child), owns_fds_(owns_fds) {
        ignore_sigpipe_once();
    }

    ~FdChannel() override {
        if (owns_fds_) {
            if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
            if (read_fd_ >= 0) ::close(read_fd_);
        }
        if (child_ > 0) {
            // Closing stdin asks the agent to exit; escalate if it lingers.
            int status = 0;
            for (int i = 0; i < 20; ++i) {
                if (::waitpid(child_, &status, WNOHANG) != 0) return;
                ::usleep(10'000);
            }
            ::kill(child_, SIGKILL);
            ::waitpid(child_, &status, 0);
        }
    }

    bool send_line(const std::string& line) override {
        std::string msg = line;
        msg.push_back('\n');
        std::size_t off = 0;
        while (off < msg.size()) {
            const ssize_t n = ::write(write_fd_, msg.data() + off, msg.size() - off);
            if (n <= 0) return false;
            off += static_cast<std::size_t>(n);
        }
        return true;
    }

    std::optional<std::string> recv_line(double timeout_s) override {
        for (;;) {
            const std::size_t nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            if (eof_) {
                if (buffer_.empty()) return std::nullopt;
                std::string line = std::move(buffer_);
                buffer_.clear();
                return line;
            }

            pollfd pfd{read_fd_, POLLIN, 0};
            const int timeout_ms = timeout_s < 0 ? -1 : static_cast<int>(timeout_s * 1000.0);
            const int rc = ::poll(&pfd, 1, timeout_ms);
            if (rc == 0) throw ProtocolError("timed out waiting for the external agent");
            if (rc < 0) {
                if (errno == EINTR) continue;
                return std::nullopt;
            }
            char chunk[4096];
            const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                return std::nullopt;
            }
            if (n == 0) {
                eof_ = true;
                continue;
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int read_fd_;
    int write_fd_;
    pid_t child_;
    bool owns_fds_;
    std::string buffer_;
    bool eof_ = false;
};

} // namespace

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port,
                                         double connect_timeout_s) {
    ignore_sigpipe_once();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
        throw ProtocolError("cannot resolve " + host + ":" + service);

    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        const int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        const int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc == 0) {
            ::fcntl(fd, F_SETFL, flags);
            break;
        }
        if (errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            const int timeout_ms =
                connect_timeout_s < 0 ? -1 : static_cast<int>(connect_timeout_s * 1000.0);
            if (::poll(&pfd, 1, timeout_ms) == 1) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                if (err == 0) {
                    ::fcntl(fd, F_SETFL, flags);
                    break;
                }
            }
        }
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
    return std::make_unique<FdChannel>(fd, fd);
}

std::unique_ptr<LineChannel> spawn_subprocess(const std::string& command) {
    ignore_sigpipe_once();
    int to_child[2];   // parent writes, child reads
    int from_child[2]; // child writes, parent reads
    if (::pipe(to_child) != 0) throw ProtocolError("pipe failed");
    if (::pipe(from_child) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw ProtocolError("pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
        throw ProtocolError("fork failed");
    }
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::make_unique<FdChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> stdio_channel() {
    return std::make_unique<FdChannel>(STDIN_FILENO, STDOUT_FILENO, -1, /*owns_fds=*/false);
}

std::unique_ptr<LineChannel> open_endpoint(const std::string& endpoint,
                                           double connect_timeout_s) {
    if (endpoint == "stdio") return stdio_channel();
    if (endpoint.rfind("cmd:", 0) == 0) return spawn_subprocess(endpoint.substr(4));
    if (endpoint.rfind("tcp:", 0) == 0) {
        const std::string rest = endpoint.substr(4);
        const std::size_t colon = rest.rfind(':');
        if (colon == std::string::npos)
            throw ConfigError("endpoint must be tcp:HOST:PORT, got '" + endpoint + "'");
        return connect_tcp(rest.substr(0, colon), std::stoi(rest.substr(colon + 1)),
                           connect_timeout_s);
    }
    throw ConfigError("unknown endpoint '" + endpoint + "' (expected tcp:..., cmd:... or stdio)");
}

} // namespace gcrl::net
