#include "prosim/ws_server.hpp"

#include <chrono>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

namespace prosim::interface {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr auto kPollInterval = std::chrono::milliseconds(2);

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, Session& session, bool& busy, bool reject)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), session_(session), busy_(busy), reject_(reject) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) {
            spdlog::warn("websocket handshake failed: {}", ec.message());
            finish();
            return;
        }
        ws_.text(true);
        if (reject_) {
            const std::string msg = error_message("busy", "an operator is already connected").dump();
            ws_.async_write(net::buffer(msg), [self = shared_from_this(), msg](beast::error_code, std::size_t) {
                self->ws_.async_close(websocket::close_code::try_again_later, [self](beast::error_code) {});
            });
            return;
        }
        spdlog::info("operator connected");
        // Anything queued while nobody listened is stale.
        while (session_.next_outbound()) {
        }
        do_read();
        schedule_pump();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            if (ec != websocket::error::closed) spdlog::warn("operator connection lost: {}", ec.message());
            finish();
            return;
        }
        session_.receive(beast::buffers_to_string(buffer_.data()));
        buffer_.consume(buffer_.size());
        do_read();
    }

    void schedule_pump() {
        if (closed_) return;
        timer_.expires_after(kPollInterval);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (!ec) self->pump();
        });
    }

    // One frame in flight at a time; a stalled client leaves the backlog in
    // the session's bounded queue, which sheds the oldest frames.
    void pump() {
        if (closed_) return;
        auto msg = session_.next_outbound();
        if (!msg) {
            schedule_pump();
            return;
        }
        in_flight_ = std::move(*msg);
        ws_.async_write(net::buffer(in_flight_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->finish();
                return;
            }
            self->pump();
        });
    }

    void finish() {
        if (closed_) return;
        closed_ = true;
        timer_.cancel();
        if (!reject_) {
            session_.disconnect();
            busy_ = false;
            spdlog::info("operator disconnected");
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    beast::flat_buffer buffer_;
    std::string in_flight_;
    Session& session_;
    bool& busy_;
    bool reject_;
    bool closed_ = false;
};

}  // namespace

struct WebSocketServer::Impl {
    Impl(Session& s, unsigned short port, const std::string& address)
        : session(s), acceptor(ioc, tcp::endpoint(net::ip::make_address(address), port)) {}

    void accept() {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec != net::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
                if (!acceptor.is_open()) return;
            } else {
                const bool reject = busy;
                busy = true;
                std::make_shared<Connection>(std::move(socket), session, busy, reject)->start();
            }
            accept();
        });
    }

    Session& session;
    net::io_context ioc{1};
    tcp::acceptor acceptor;
    bool busy = false;  // touched only on the io thread
};

WebSocketServer::WebSocketServer(Session& session, unsigned short port, const std::string& address)
    : impl_(std::make_unique<Impl>(session, port, address)) {}

WebSocketServer::~WebSocketServer() = default;

unsigned short WebSocketServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WebSocketServer::run() {
    spdlog::info("listening on ws://{}:{}", impl_->acceptor.local_endpoint().address().to_string(), port());
    impl_->accept();
    impl_->ioc.run();
}

void WebSocketServer::stop() {
    net::post(impl_->ioc, [this] {
        beast::error_code ec;
        impl_->acceptor.close(ec);
        impl_->ioc.stop();
    });
}

}  // namespace prosim::interface
