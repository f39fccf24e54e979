#pragma once

#include "tlsaudit/types.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace tlsaudit::net
{

using Millis = std::chrono::milliseconds;

class NetError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Connection refused, unresolvable host, or connect timeout.
class ConnectError : public NetError
{
public:
    using NetError::NetError;
};

class Socket
{
public:
    Socket() = default;
    explicit Socket(int fd)
        : fd_(fd)
    {
    }
    ~Socket();
    Socket(Socket&& o) noexcept;
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    static Socket connect(const std::string& host, std::uint16_t port, Millis timeout);

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    void close() noexcept;
    void shutdown_write() noexcept;

    void send_all(std::span<const std::uint8_t> data, Millis timeout);
    void send_all(std::string_view text, Millis timeout);

    /// Appends what arrives within `timeout` (at most `max` bytes). Returns
    /// the number read; 0 means EOF or timeout, see `eof()`.
    std::size_t recv_some(Bytes& buf, Millis timeout, std::size_t max = 65536);

    /// Reads until `done(buf)` holds, EOF, the deadline, or `limit` bytes.
    Bytes recv_until(const std::function<bool(const Bytes&)>& done, Millis timeout, std::size_t limit = 1 << 20);

    /// One CRLF- or LF-terminated line without the terminator. Throws NetError
    /// on EOF or timeout.
    std::string read_line(Millis timeout, std::size_t limit = 8192);

    bool eof() const noexcept { return eof_; }

private:
    int fd_ = -1;
    bool eof_ = false;
    Bytes pending_; // bytes read past the last line
};

class Listener
{
public:
    /// Binds host:port (port 0 picks a free one). Throws NetError.
    Listener(const std::string& host, std::uint16_t port);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    std::uint16_t port() const noexcept { return port_; }
    /// Waits up to `timeout`; returns an invalid socket on timeout.
    Socket accept(Millis timeout);
    void close() noexcept;

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// "host:port", "[v6]:port"; throws std::invalid_argument.
std::pair<std::string, std::uint16_t> split_host_port(std::string_view s);

} // namespace tlsaudit::net
