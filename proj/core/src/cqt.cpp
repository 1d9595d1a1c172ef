#include "pesto/cqt.hpp"

#include "pesto/common.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace pesto {

double CqtConfig::bin_frequency(int i) const {
    return f_min * std::pow(2.0, double(i) / (12.0 * bins_per_semitone));
}

double CqtConfig::q_factor() const {
    return 1.0 / (std::pow(2.0, 1.0 / (12.0 * bins_per_semitone)) - 1.0);
}

void CqtConfig::validate() const {
    if (!(f_min > 0.0)) throw ValidationError("cqt: f_min must be positive");
    if (bins_per_semitone < 1 || n_bins < 1 || hop < 1 || sample_rate < 1)
        throw ValidationError("cqt: counts must be positive");
}

namespace {

nlohmann::json config_json(const CqtConfig& c) {
    return {{"f_min", c.f_min},
            {"bins_per_semitone", c.bins_per_semitone},
            {"n_bins", c.n_bins},
            {"hop", c.hop},
            {"sample_rate", c.sample_rate},
            {"scale", c.scale == CqtScale::db ? "db" : "complex"}};
}

CqtConfig config_from_json(const nlohmann::json& j) {
    CqtConfig c;
    c.f_min = j.at("f_min").get<double>();
    c.bins_per_semitone = j.at("bins_per_semitone").get<int>();
    c.n_bins = j.at("n_bins").get<int>();
    c.hop = j.at("hop").get<int>();
    c.sample_rate = j.at("sample_rate").get<int>();
    c.scale = j.at("scale").get<std::string>() == "db" ? CqtScale::db : CqtScale::cplx;
    return c;
}

constexpr double kKernelTruncation = 1e-4; // relative spectral magnitude kept

} // namespace

CqtAnalyzer::CqtAnalyzer(const CqtConfig& config)
    : cfg_(config),
      fft_size_(next_pow2(std::size_t(
          std::llround(config.q_factor() * config.sample_rate / config.f_min)))),
      plan_(fft_size_ / 2) {
    cfg_.validate();
    const std::size_t n = fft_size_;
    const std::size_t half = n / 2;

    // Unpack twiddles for the packed real FFT:
    // X[v] = Z[v]*A[v] + conj(Z[half-v])*B[v], v in [0, half].
    unpack_a_.resize(half + 1);
    unpack_b_.resize(half + 1);
    for (std::size_t v = 0; v <= half; ++v) {
        const double ang = -2.0 * M_PI * double(v) / double(n);
        const std::complex<double> w(std::cos(ang), std::sin(ang));
        const std::complex<double> iw(-w.imag(), w.real());
        unpack_a_[v] = std::complex<float>(std::complex<double>(0.5, 0.0) - 0.5 * iw);
        unpack_b_[v] = std::complex<float>(std::complex<double>(0.5, 0.0) + 0.5 * iw);
    }

    const double q = cfg_.q_factor();
    kernels_.resize(std::size_t(cfg_.n_bins));
    std::vector<std::complex<double>> buf(n);
    std::vector<std::complex<float>> fbuf(n);
    FftPlan full_plan(n);

    for (int i = 0; i < cfg_.n_bins; ++i) {
        const double f = cfg_.bin_frequency(i);
        const long len = std::max<long>(2, std::llround(q * cfg_.sample_rate / f));
        if (std::size_t(len) > n)
            throw ValidationError("cqt: kernel longer than FFT size");

        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        double wsum = 0.0;
        const long start = long(n) / 2 - (len - 1) / 2;
        for (long m = 0; m < len; ++m) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(m) / double(len - 1));
            wsum += w;
        }
        const double norm = 2.0 / wsum; // full-scale sinusoid at the bin center -> ~0 dB
        for (long m = 0; m < len; ++m) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(m) / double(len - 1));
            const long pos = start + m;
            const double phase = 2.0 * M_PI * f * double(pos - long(n) / 2) / cfg_.sample_rate;
            buf[std::size_t(pos)] =
                w * norm * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        for (std::size_t m = 0; m < n; ++m) fbuf[m] = std::complex<float>(buf[m]);
        full_plan.forward(fbuf);

        // Keep the kernel's positive-frequency support up to Nyquist; bins
        // whose center lies beyond Nyquist retain only their in-band tail.
        double max_mag = 0.0;
        for (std::size_t v = 0; v <= half; ++v) max_mag = std::max(max_mag, double(std::abs(fbuf[v])));
        const double thresh = kKernelTruncation * max_mag;
        std::size_t lo = half + 1, hi = 0;
        for (std::size_t v = 0; v <= half; ++v) {
            if (std::abs(fbuf[v]) >= thresh) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (lo > hi) { lo = 0; hi = 0; }
        SparseKernel sk;
        sk.start = std::uint32_t(lo);
        sk.conj.resize(hi - lo + 1);
        const float scale = 1.0f / float(n);
        for (std::size_t v = lo; v <= hi; ++v)
            sk.conj[v - lo] = std::conj(fbuf[v]) * scale;
        kernels_[std::size_t(i)] = std::move(sk);
    }
}

void CqtAnalyzer::frame_complex(const float* samples, std::size_t n_samples, long center,
                                std::complex<float>* out) const {
    const std::size_t n = fft_size_;
    const std::size_t half = n / 2;
    const long first = center - long(n) / 2;

    // Pack the real slice into a half-size complex buffer (even + i*odd).
    std::vector<std::complex<float>> z(half, std::complex<float>(0.0f, 0.0f));
    for (std::size_t k = 0; k < half; ++k) {
        const long i0 = first + long(2 * k);
        const long i1 = i0 + 1;
        const float re = (i0 >= 0 && i0 < long(n_samples)) ? samples[i0] : 0.0f;
        const float im = (i1 >= 0 && i1 < long(n_samples)) ? samples[i1] : 0.0f;
        z[k] = {re, im};
    }
    plan_.forward(z);

    std::vector<std::complex<float>> spectrum(half + 1);
    {
        const float* __restrict__ zp = reinterpret_cast<const float*>(z.data());
        const float* __restrict__ ap = reinterpret_cast<const float*>(unpack_a_.data());
        const float* __restrict__ bp = reinterpret_cast<const float*>(unpack_b_.data());
        float* __restrict__ sp = reinterpret_cast<float*>(spectrum.data());
        for (std::size_t v = 0; v <= half; ++v) {
            const std::size_t iv = (v == half) ? 0 : v;
            const std::size_t ic = (half - v == half) ? 0 : half - v;
            const float zr = zp[2 * iv], zi = zp[2 * iv + 1];
            const float cr = zp[2 * ic], ci = -zp[2 * ic + 1];
            const float ar = ap[2 * v], ai = ap[2 * v + 1];
            const float br = bp[2 * v], bi = bp[2 * v + 1];
            sp[2 * v] = zr * ar - zi * ai + cr * br - ci * bi;
            sp[2 * v + 1] = zr * ai + zi * ar + cr * bi + ci * br;
        }
    }

    for (int i = 0; i < cfg_.n_bins; ++i) {
        const SparseKernel& sk = kernels_[std::size_t(i)];
        float acc_re = 0.0f, acc_im = 0.0f;
        const std::complex<float>* xs = spectrum.data() + sk.start;
        const std::complex<float>* ks = sk.conj.data();
        const std::size_t m = sk.conj.size();
        for (std::size_t j = 0; j < m; ++j) {
            const float xr = xs[j].real(), xi = xs[j].imag();
            const float kr = ks[j].real(), ki = ks[j].imag();
            acc_re += xr * kr - xi * ki;
            acc_im += xr * ki + xi * kr;
        }
        out[i] = {acc_re, acc_im};
    }
}

CqtSequence CqtAnalyzer::forward(const AudioClip& clip) const {
    if (clip.samples.empty()) throw ValidationError("cqt_forward: empty clip");
    if (clip.sample_rate != cfg_.sample_rate)
        throw ValidationError("cqt_forward: clip rate " + std::to_string(clip.sample_rate) +
                              " != config rate " + std::to_string(cfg_.sample_rate));

    const int n_frames = int((clip.samples.size() + std::size_t(cfg_.hop) - 1) / cfg_.hop);
    CqtSequence seq;
    seq.config = cfg_;
    seq.n_frames = n_frames;
    const std::size_t k = std::size_t(cfg_.n_bins);

    std::vector<std::complex<float>> row(k);
    if (cfg_.scale == CqtScale::db) {
        seq.db.resize(std::size_t(n_frames) * k);
        for (int t = 0; t < n_frames; ++t) {
            frame_complex(clip.samples.data(), clip.samples.size(), long(t) * cfg_.hop, row.data());
            float* dst = seq.frame(t);
            for (std::size_t i = 0; i < k; ++i)
                dst[i] = 20.0f * std::log10(std::abs(row[i]) + float(kCqtEpsMag));
        }
    } else {
        seq.cx.resize(std::size_t(n_frames) * k);
        for (int t = 0; t < n_frames; ++t)
            frame_complex(clip.samples.data(), clip.samples.size(), long(t) * cfg_.hop,
                          seq.cx.data() + std::size_t(t) * k);
    }
    return seq;
}

CqtSequence cqt_forward(const AudioClip& clip, const CqtConfig& config) {
    return CqtAnalyzer(config).forward(clip);
}

CqtSequence mix_complex(const CqtSequence& vocals, const CqtSequence& background, double beta) {
    if (vocals.config.scale != CqtScale::cplx || background.config.scale != CqtScale::cplx)
        throw ValidationError("mix_complex: both sequences must be complex-mode");
    if (!(vocals.config == background.config) || vocals.n_frames != background.n_frames)
        throw ValidationError("mix_complex: config/frame-count mismatch");
    CqtSequence out = vocals;
    const float b = float(beta);
    for (std::size_t i = 0; i < out.cx.size(); ++i) out.cx[i] += b * background.cx[i];
    return out;
}

CqtSequence complex_to_db(const CqtSequence& seq) {
    if (seq.config.scale != CqtScale::cplx)
        throw ValidationError("complex_to_db: input is not complex-mode");
    CqtSequence out;
    out.config = seq.config;
    out.config.scale = CqtScale::db;
    out.n_frames = seq.n_frames;
    out.db.resize(seq.cx.size());
    for (std::size_t i = 0; i < seq.cx.size(); ++i)
        out.db[i] = 20.0f * std::log10(std::abs(seq.cx[i]) + float(kCqtEpsMag));
    return out;
}

void write_cqt_cache(const std::string& path, const CqtSequence& seq) {
    nlohmann::json header = {{"config", config_json(seq.config)}, {"n_frames", seq.n_frames}};
    const std::string hj = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("write_cqt_cache: cannot open " + path);
    f.write("PCQT", 4);
    const std::uint32_t version = 1;
    f.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t hlen = hj.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hj.data(), std::streamsize(hj.size()));
    if (seq.config.scale == CqtScale::db) {
        f.write(reinterpret_cast<const char*>(seq.db.data()),
                std::streamsize(seq.db.size() * sizeof(float)));
    } else {
        f.write(reinterpret_cast<const char*>(seq.cx.data()),
                std::streamsize(seq.cx.size() * sizeof(std::complex<float>)));
    }
}

CqtSequence read_cqt_cache(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("read_cqt_cache: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "PCQT", 4) != 0)
        throw FormatError("read_cqt_cache: bad magic in " + path);
    std::uint32_t version = 0;
    std::uint64_t hlen = 0;
    if (!f.read(reinterpret_cast<char*>(&version), 4) || version != 1)
        throw FormatError("read_cqt_cache: unsupported version in " + path);
    if (!f.read(reinterpret_cast<char*>(&hlen), 8))
        throw FormatError("read_cqt_cache: truncated header in " + path);
    std::string hj(hlen, '\0');
    if (!f.read(hj.data(), std::streamsize(hlen)))
        throw FormatError("read_cqt_cache: truncated header in " + path);

    CqtSequence seq;
    try {
        const auto header = nlohmann::json::parse(hj);
        seq.config = config_from_json(header.at("config"));
        seq.n_frames = header.at("n_frames").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("read_cqt_cache: bad header json: ") + e.what());
    }
    const std::size_t count = std::size_t(seq.n_frames) * std::size_t(seq.config.n_bins);
    if (seq.config.scale == CqtScale::db) {
        seq.db.resize(count);
        if (!f.read(reinterpret_cast<char*>(seq.db.data()),
                    std::streamsize(count * sizeof(float))))
            throw FormatError("read_cqt_cache: truncated payload in " + path);
    } else {
        seq.cx.resize(count);
        if (!f.read(reinterpret_cast<char*>(seq.cx.data()),
                    std::streamsize(count * sizeof(std::complex<float>))))
            throw FormatError("read_cqt_cache: truncated payload in " + path);
    }
    return seq;
}

} // namespace pesto
