#include "fedevo/log.hpp"

#include <iostream>
#include <mutex>

namespace fedevo {
namespace {

std::mutex g_sink_mutex;

WarningSink& sink_ref() {
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(g_sink_mutex);
    auto previous = std::move(sink_ref());
    sink_ref() = std::move(sink);
    return previous;
}

void warn(const std::string& message) {
    std::lock_guard lock(g_sink_mutex);
    if (sink_ref()) sink_ref()(message);
}

}  // namespace fedevo
