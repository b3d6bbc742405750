#pragma once

#include <memory>
#include <optional>
#include <string>

namespace gcrl::net {

// Newline-delimited message channel to an external agent.
class LineChannel {
public:
    virtual ~LineChannel() = default;

    // Sends one line (newline appended). false = connection lost.
    virtual bool send_line(const std::string& line) = 0;

    // Receives one line (terminator stripped). nullopt = EOF/connection
    // lost. Throws ProtocolError when timeout_s elapses first.
    virtual std::optional<std::string> recv_line(double timeout_s) = 0;
};

// "tcp:HOST:PORT"  — connect to a listening agent
// "cmd:SHELL"      — spawn the command, talk over its stdin/stdout
// "stdio"          — use this process's own stdin/stdout
std::unique_ptr<LineChannel> open_endpoint(const std::string& endpoint, double connect_timeout_s);

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port,
                                         double connect_timeout_s);
std::unique_ptr<LineChannel> spawn_subprocess(const std::string& command);
std::unique_ptr<LineChannel> stdio_channel();

} // namespace gcrl::net
