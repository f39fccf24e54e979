#include "tlsaudit/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace tlsaudit::net
{

namespace
{

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline)
{
    auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

bool wait_fd(int fd, short events, Clock::time_point deadline)
{
    for (;;)
    {
        pollfd p{fd, events, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc > 0)
            return true;
        if (rc == 0)
            return false;
        if (errno != EINTR)
            throw NetError(std::string("poll: ") + std::strerror(errno));
    }
}

void set_nonblocking(int fd)
{
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

} // namespace

Socket::~Socket()
{
    close();
}

Socket::Socket(Socket&& o) noexcept
    : fd_(o.fd_)
    , eof_(o.eof_)
    , pending_(std::move(o.pending_))
{
    o.fd_ = -1;
}

Socket& Socket::operator=(Socket&& o) noexcept
{
    if (this != &o)
    {
        close();
        fd_ = o.fd_;
        eof_ = o.eof_;
        pending_ = std::move(o.pending_);
        o.fd_ = -1;
    }
    return *this;
}

void Socket::close() noexcept
{
    if (fd_ >= 0)
        ::close(fd_);
    fd_ = -1;
}

void Socket::shutdown_write() noexcept
{
    if (fd_ >= 0)
        ::shutdown(fd_, SHUT_WR);
}

Socket Socket::connect(const std::string& host, std::uint16_t port, Millis timeout)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
        throw ConnectError("cannot resolve " + host + ": " + ::gai_strerror(rc));

    const auto deadline = Clock::now() + timeout;
    std::string last = "no addresses";
    for (auto* ai = res; ai; ai = ai->ai_next)
    {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0)
            continue;
        Socket s(fd);
        set_nonblocking(fd);
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno != EINPROGRESS)
        {
            last = std::strerror(errno);
            continue;
        }
        if (rc != 0)
        {
            if (!wait_fd(fd, POLLOUT, deadline))
            {
                last = "connect timed out";
                continue;
            }
            int err = 0;
            socklen_t len = sizeof err;
            ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0)
            {
                last = std::strerror(err);
                continue;
            }
        }
        ::freeaddrinfo(res);
        return s;
    }
    ::freeaddrinfo(res);
    throw ConnectError("cannot connect to " + host + ":" + service + ": " + last);
}

void Socket::send_all(std::span<const std::uint8_t> data, Millis timeout)
{
    const auto deadline = Clock::now() + timeout;
    std::size_t off = 0;
    while (off < data.size())
    {
        ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n > 0)
        {
            off += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR))
        {
            if (!wait_fd(fd_, POLLOUT, deadline))
                throw NetError("send timed out");
            continue;
        }
        throw NetError(std::string("send: ") + std::strerror(errno));
    }
}

void Socket::send_all(std::string_view text, Millis timeout)
{
    send_all(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), timeout);
}

std::size_t Socket::recv_some(Bytes& buf, Millis timeout, std::size_t max)
{
    if (!pending_.empty())
    {
        auto n = std::min(max, pending_.size());
        buf.insert(buf.end(), pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
        return n;
    }
    if (eof_)
        return 0;
    const auto deadline = Clock::now() + timeout;
    for (;;)
    {
        if (!wait_fd(fd_, POLLIN, deadline))
            return 0;
        const auto old = buf.size();
        buf.resize(old + max);
        ssize_t n = ::recv(fd_, buf.data() + old, max, 0);
        if (n > 0)
        {
            buf.resize(old + static_cast<std::size_t>(n));
            return static_cast<std::size_t>(n);
        }
        buf.resize(old);
        if (n == 0)
        {
            eof_ = true;
            return 0;
        }
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
            continue;
        if (errno == ECONNRESET)
        {
            eof_ = true;
            return 0;
        }
        throw NetError(std::string("recv: ") + std::strerror(errno));
    }
}

Bytes Socket::recv_until(const std::function<bool(const Bytes&)>& done, Millis timeout, std::size_t limit)
{
    Bytes buf;
    const auto deadline = Clock::now() + timeout;
    while (!done(buf) && buf.size() < limit)
    {
        auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
        if (left.count() <= 0)
            break;
        if (recv_some(buf, left, std::min<std::size_t>(limit - buf.size(), 65536)) == 0)
            break;
    }
    return buf;
}

std::string Socket::read_line(Millis timeout, std::size_t limit)
{
    const auto deadline = Clock::now() + timeout;
    Bytes buf;
    for (;;)
    {
        auto nl = std::find(buf.begin(), buf.end(), '\n');
        if (nl != buf.end())
        {
            std::string line(buf.begin(), nl);
            pending_.insert(pending_.begin(), nl + 1, buf.end());
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return line;
        }
        if (buf.size() > limit)
            throw NetError("line too long");
        auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
        if (left.count() <= 0 || recv_some(buf, left, 4096) == 0)
            throw NetError(eof_ ? "connection closed" : "timed out waiting for a line");
    }
}

Listener::Listener(const std::string& host, std::uint16_t port)
{
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0)
        throw NetError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    {
        close();
        throw NetError("listener needs an IPv4 address, got " + host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0)
    {
        auto msg = std::string("bind ") + host + ":" + std::to_string(port) + ": " + std::strerror(errno);
        close();
        throw NetError(msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Listener::~Listener()
{
    close();
}

void Listener::close() noexcept
{
    if (fd_ >= 0)
        ::close(fd_);
    fd_ = -1;
}

Socket Listener::accept(Millis timeout)
{
    if (fd_ < 0)
        return Socket{};
    if (!wait_fd(fd_, POLLIN, Clock::now() + timeout))
        return Socket{};
    int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
    if (fd < 0)
        return Socket{};
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Socket(fd);
}

std::pair<std::string, std::uint16_t> split_host_port(std::string_view s)
{
    std::string host;
    std::string_view port;
    if (!s.empty() && s.front() == '[')
    {
        auto close = s.find(']');
        if (close == std::string_view::npos || close + 1 >= s.size() || s[close + 1] != ':')
            throw std::invalid_argument("expected [address]:port");
        host = s.substr(1, close - 1);
        port = s.substr(close + 2);
    }
    else
    {
        auto colon = s.rfind(':');
        if (colon == std::string_view::npos || colon == 0)
            throw std::invalid_argument("expected host:port");
        host = s.substr(0, colon);
        port = s.substr(colon + 1);
    }
    int value = 0;
    for (char c : port)
    {
        if (c < '0' || c > '9' || value > 65535)
            throw std::invalid_argument("bad port");
        value = value * 10 + (c - '0');
    }
    if (port.empty() || value < 1 || value > 65535)
        throw std::invalid_argument("port must be in 1..65535");
    return {host, static_cast<std::uint16_t>(value)};
}

} // namespace tlsaudit::net
