#pragma once

#include <sys/socket.h>

#include <httplib.h>

namespace skyanchor::detail {

// httplib's default also sets SO_REUSEPORT, which lets a second server
// share a port that is already listening. Keep only SO_REUSEADDR so such a
// bind fails.
inline void exclusive_listen(httplib::Server& server) {
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
}

}  // namespace skyanchor::detail
