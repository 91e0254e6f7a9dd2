#pragma once

#include <memory>
#include <string>

#include "prosim/session.hpp"

namespace prosim::interface {

/// WebSocket front end for a Session. One operator connection at a time;
/// further connections get an error frame and are closed. Each text frame
/// carries one JSON message.
class WebSocketServer {
public:
    /// Binds immediately; port 0 picks a free port.
    WebSocketServer(Session& session, unsigned short port, const std::string& address = "127.0.0.1");
    ~WebSocketServer();
    WebSocketServer(const WebSocketServer&) = delete;
    WebSocketServer& operator=(const WebSocketServer&) = delete;

    unsigned short port() const;
    /// Serves until stop(); call from the network thread.
    void run();
    /// Thread-safe.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace prosim::interface
