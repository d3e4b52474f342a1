#include "repairenv/build_gate.hpp"

#include <algorithm>

#include "repairenv/error.hpp"

namespace repairenv {

BuildGate::BuildGate(std::size_t permits) : permits_(permits) {
    if (permits == 0) throw Error(Errc::InvalidArgument, "build gate needs at least one permit");
}

BuildGate::Permit::~Permit() {
    if (gate_ != nullptr) gate_->release();
}

BuildGate::Permit BuildGate::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < permits_; });
    ++in_flight_;
    ++total_;
    max_in_flight_ = std::max(max_in_flight_, in_flight_);
    return Permit(this);
}

void BuildGate::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::size_t BuildGate::in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
}

std::size_t BuildGate::max_in_flight() const {
    std::lock_guard lock(mu_);
    return max_in_flight_;
}

std::size_t BuildGate::total_acquired() const {
    std::lock_guard lock(mu_);
    return total_;
}

void BuildGate::reset_stats() {
    std::lock_guard lock(mu_);
    max_in_flight_ = in_flight_;
    total_ = 0;
}

}  // namespace repairenv
