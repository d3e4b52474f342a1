#pragma once

#include <condition_variable>
#include <cstddef>
#include <mutex>

namespace repairenv {

/// Counting semaphore bounding the number of builds in flight, with a high-water mark
/// so callers can verify the bound held.
class BuildGate {
public:
    explicit BuildGate(std::size_t permits);
    BuildGate(const BuildGate&) = delete;
    BuildGate& operator=(const BuildGate&) = delete;

    class Permit {
    public:
        Permit(Permit&& other) noexcept : gate_(other.gate_) { other.gate_ = nullptr; }
        Permit& operator=(Permit&&) = delete;
        Permit(const Permit&) = delete;
        ~Permit();

    private:
        friend class BuildGate;
        explicit Permit(BuildGate* gate) : gate_(gate) {}
        BuildGate* gate_;
    };

    [[nodiscard]] Permit acquire();

    [[nodiscard]] std::size_t permits() const noexcept { return permits_; }
    [[nodiscard]] std::size_t in_flight() const;
    [[nodiscard]] std::size_t max_in_flight() const;
    [[nodiscard]] std::size_t total_acquired() const;
    void reset_stats();

private:
    void release();

    const std::size_t permits_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    std::size_t max_in_flight_ = 0;
    std::size_t total_ = 0;
};

}  // namespace repairenv
