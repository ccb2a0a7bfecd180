// Labeled window container and its binary file format.
//
// File layout (little-endian):
//   magic   "SCWIN1\n"
//   u32     n_cols, u32 window_len, u64 n_windows
//   per column: u16 name length + name bytes
//   f32[n_windows * window_len * n_cols]   row-major window payload
//   u8 [n_windows]                         labels
//   i64[n_windows]                         window start timestamps (utc)
//   i32[n_windows]                         participant ids
//   u8 [n_windows]                         flags (bit 0: synthetic)
#pragma once

#include <atomic>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "sparsecast/common.hpp"

namespace sparsecast {

// Instrumentation for the trainer's streaming-memory contract: every live
// WindowSet registers its payload bytes here.
struct WindowMemoryGauge {
    static std::atomic<std::int64_t>& current() {
        static std::atomic<std::int64_t> v{0};
        return v;
    }
    static std::atomic<std::int64_t>& peak() {
        static std::atomic<std::int64_t> v{0};
        return v;
    }
    static void add(std::int64_t bytes) {
        std::int64_t now = current().fetch_add(bytes) + bytes;
        std::int64_t p = peak().load();
        while (now > p && !peak().compare_exchange_weak(p, now)) {
        }
    }
    static void reset_peak() { peak().store(current().load()); }
};

constexpr std::uint8_t kWindowFlagSynthetic = 1;

class WindowSet {
public:
    WindowSet() = default;
    WindowSet(int window_len, std::vector<std::string> col_names)
        : window_len_(window_len), col_names_(std::move(col_names)) {}

    WindowSet(const WindowSet& o)
        : window_len_(o.window_len_), col_names_(o.col_names_), data_(o.data_), labels_(o.labels_),
          start_ts_(o.start_ts_), participant_(o.participant_), flags_(o.flags_) {
        WindowMemoryGauge::add(payload_bytes());
    }
    WindowSet& operator=(const WindowSet& o) {
        if (this != &o) {
            WindowMemoryGauge::add(-payload_bytes());
            window_len_ = o.window_len_;
            col_names_ = o.col_names_;
            data_ = o.data_;
            labels_ = o.labels_;
            start_ts_ = o.start_ts_;
            participant_ = o.participant_;
            flags_ = o.flags_;
            WindowMemoryGauge::add(payload_bytes());
        }
        return *this;
    }
    WindowSet(WindowSet&& o) noexcept { swap(o); }
    WindowSet& operator=(WindowSet&& o) noexcept {
        swap(o);
        return *this;
    }
    ~WindowSet() { WindowMemoryGauge::add(-payload_bytes()); }

    int window_len() const { return window_len_; }
    int n_cols() const { return static_cast<int>(col_names_.size()); }
    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    const std::vector<std::string>& col_names() const { return col_names_; }

    std::span<const double> window(std::size_t i) const {
        std::size_t stride = static_cast<std::size_t>(window_len_) * static_cast<std::size_t>(n_cols());
        return {data_.data() + i * stride, stride};
    }
    std::span<double> window_mut(std::size_t i) {
        std::size_t stride = static_cast<std::size_t>(window_len_) * static_cast<std::size_t>(n_cols());
        return {data_.data() + i * stride, stride};
    }
    bool label(std::size_t i) const { return labels_[i] != 0; }
    std::int64_t start_ts(std::size_t i) const { return start_ts_[i]; }
    int participant(std::size_t i) const { return participant_[i]; }
    bool synthetic(std::size_t i) const { return (flags_[i] & kWindowFlagSynthetic) != 0; }

    const std::vector<double>& raw() const { return data_; }
    const std::vector<std::uint8_t>& labels() const { return labels_; }

    void push_window(std::span<const double> values, bool label, std::int64_t start_ts, int participant,
                     std::uint8_t flags = 0) {
        if (static_cast<int>(values.size()) != window_len_ * n_cols())
            throw DataError("push_window: wrong value count");
        std::int64_t before = payload_bytes();
        data_.insert(data_.end(), values.begin(), values.end());
        labels_.push_back(label ? 1 : 0);
        start_ts_.push_back(start_ts);
        participant_.push_back(participant);
        flags_.push_back(flags);
        WindowMemoryGauge::add(payload_bytes() - before);
    }

    void append(const WindowSet& other) {
        if (other.empty()) return;
        if (window_len_ == 0 && col_names_.empty()) {
            window_len_ = other.window_len_;
            col_names_ = other.col_names_;
        }
        if (other.window_len_ != window_len_ || other.col_names_ != col_names_)
            throw DataError("append: incompatible window sets");
        std::int64_t before = payload_bytes();
        data_.insert(data_.end(), other.data_.begin(), other.data_.end());
        labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
        start_ts_.insert(start_ts_.end(), other.start_ts_.begin(), other.start_ts_.end());
        participant_.insert(participant_.end(), other.participant_.begin(), other.participant_.end());
        flags_.insert(flags_.end(), other.flags_.begin(), other.flags_.end());
        WindowMemoryGauge::add(payload_bytes() - before);
    }

    // Column projection: keeps `cols` (in the given order) for every window.
    WindowSet project(const std::vector<int>& cols, std::vector<std::string> new_names) const {
        WindowSet out(window_len_, std::move(new_names));
        std::vector<double> buf(static_cast<std::size_t>(window_len_) * cols.size());
        for (std::size_t i = 0; i < size(); ++i) {
            auto w = window(i);
            for (int t = 0; t < window_len_; ++t)
                for (std::size_t c = 0; c < cols.size(); ++c)
                    buf[static_cast<std::size_t>(t) * cols.size() + c] =
                        w[static_cast<std::size_t>(t) * static_cast<std::size_t>(n_cols()) +
                          static_cast<std::size_t>(cols[c])];
            out.push_window(buf, label(i), start_ts_[i], participant_[i], flags_[i]);
        }
        return out;
    }

    std::size_t count_label(bool v) const {
        std::size_t n = 0;
        for (auto l : labels_)
            if ((l != 0) == v) ++n;
        return n;
    }

    std::int64_t payload_bytes() const { return static_cast<std::int64_t>(data_.size() * sizeof(double)); }

private:
    void swap(WindowSet& o) {
        std::swap(window_len_, o.window_len_);
        std::swap(col_names_, o.col_names_);
        std::swap(data_, o.data_);
        std::swap(labels_, o.labels_);
        std::swap(start_ts_, o.start_ts_);
        std::swap(participant_, o.participant_);
        std::swap(flags_, o.flags_);
    }

    int window_len_ = 0;
    std::vector<std::string> col_names_;
    std::vector<double> data_;
    std::vector<std::uint8_t> labels_;
    std::vector<std::int64_t> start_ts_;
    std::vector<int> participant_;
    std::vector<std::uint8_t> flags_;
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

template <typename T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_vec(std::istream& in, std::vector<T>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
}

}  // namespace detail

inline void save_windows(const std::string& path, const WindowSet& ws) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write("SCWIN1\n", 7);
    detail::write_pod(out, static_cast<std::uint32_t>(ws.n_cols()));
    detail::write_pod(out, static_cast<std::uint32_t>(ws.window_len()));
    detail::write_pod(out, static_cast<std::uint64_t>(ws.size()));
    for (const auto& name : ws.col_names()) {
        detail::write_pod(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    // The on-disk payload is 32-bit float; in-memory windows are double so
    // synthetic samples keep their exact interpolation identity.
    std::vector<float> payload(ws.raw().size());
    for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<float>(ws.raw()[i]);
    detail::write_vec(out, payload);
    detail::write_vec(out, ws.labels());
    std::vector<std::int64_t> ts(ws.size());
    std::vector<std::int32_t> pid(ws.size());
    std::vector<std::uint8_t> fl(ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        ts[i] = ws.start_ts(i);
        pid[i] = ws.participant(i);
        fl[i] = ws.synthetic(i) ? kWindowFlagSynthetic : 0;
    }
    detail::write_vec(out, ts);
    detail::write_vec(out, pid);
    detail::write_vec(out, fl);
    if (!out) throw DataError("write failed: " + path);
}

inline WindowSet load_windows(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("window container not found: " + path);
    char magic[7];
    in.read(magic, 7);
    if (!in || std::memcmp(magic, "SCWIN1\n", 7) != 0) throw DataError("bad window container magic: " + path);
    std::uint32_t n_cols = 0, window_len = 0;
    std::uint64_t n_windows = 0;
    detail::read_pod(in, n_cols);
    detail::read_pod(in, window_len);
    detail::read_pod(in, n_windows);
    std::vector<std::string> names(n_cols);
    for (auto& name : names) {
        std::uint16_t len = 0;
        detail::read_pod(in, len);
        name.resize(len);
        in.read(name.data(), len);
    }
    WindowSet ws(static_cast<int>(window_len), std::move(names));
    std::vector<float> data;
    std::vector<std::uint8_t> labels;
    std::vector<std::int64_t> ts;
    std::vector<std::int32_t> pid;
    std::vector<std::uint8_t> fl;
    std::size_t stride = static_cast<std::size_t>(window_len) * n_cols;
    detail::read_vec(in, data, n_windows * stride);
    detail::read_vec(in, labels, n_windows);
    detail::read_vec(in, ts, n_windows);
    detail::read_vec(in, pid, n_windows);
    detail::read_vec(in, fl, n_windows);
    if (!in) throw DataError("truncated window container: " + path);
    std::vector<double> buf(stride);
    for (std::uint64_t i = 0; i < n_windows; ++i) {
        for (std::size_t c = 0; c < stride; ++c) buf[c] = data[i * stride + c];
        ws.push_window(buf, labels[i] != 0, ts[i], pid[i], fl[i]);
    }
    return ws;
}

}  // namespace sparsecast
