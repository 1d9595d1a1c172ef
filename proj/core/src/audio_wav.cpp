#include "pesto/audio.hpp"
#include "pesto/common.hpp"

#include <cstring>
#include <fstream>

namespace pesto {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
    return std::uint16_t(p[0] | p[1] << 8);
}

void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
    s.push_back(char((v >> 16) & 0xff));
    s.push_back(char((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
}

} // namespace

AudioClip load_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("load_wav: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError("load_wav: not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + off);
        std::uint32_t len = read_u32(bytes.data() + off + 4);
        off += 8;
        if (off + len > bytes.size()) {
            if (std::memcmp(tag, "data", 4) == 0) {
                // tolerate a data chunk cut short at EOF
                len = std::uint32_t(bytes.size() - off);
            } else {
                throw FormatError("load_wav: truncated chunk in " + path);
            }
        }
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (len < 16) throw FormatError("load_wav: fmt chunk too small in " + path);
            format = read_u16(bytes.data() + off);
            channels = read_u16(bytes.data() + off + 2);
            rate = read_u32(bytes.data() + off + 4);
            bits = read_u16(bytes.data() + off + 14);
            if (format == 0xfffe && len >= 40) // WAVE_FORMAT_EXTENSIBLE: subformat GUID
                format = read_u16(bytes.data() + off + 24);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data = bytes.data() + off;
            data_len = len;
        }
        off += len + (len & 1); // chunks are word aligned
    }

    if (!have_fmt || data == nullptr) throw FormatError("load_wav: missing fmt/data chunk in " + path);
    if (channels == 0 || rate == 0) throw FormatError("load_wav: bad fmt fields in " + path);

    const bool is_float = format == 3;
    if (format != 1 && !is_float)
        throw UnsupportedError("load_wav: unsupported codec tag " + std::to_string(format));
    if (is_float && bits != 32)
        throw UnsupportedError("load_wav: only 32-bit float supported");
    if (!is_float && bits != 16 && bits != 24 && bits != 32)
        throw UnsupportedError("load_wav: unsupported PCM depth " + std::to_string(bits));

    const std::size_t bytes_per = bits / 8;
    const std::size_t frame_bytes = bytes_per * channels;
    const std::size_t n_frames = data_len / frame_bytes;
    if (n_frames == 0) throw FormatError("load_wav: empty data chunk in " + path);

    AudioClip clip;
    clip.sample_rate = int(rate);
    clip.id = path;
    clip.samples.resize(n_frames);
    const double inv_ch = 1.0 / double(channels);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + i * frame_bytes + c * bytes_per;
            double v;
            if (is_float) {
                float fv;
                std::memcpy(&fv, p, 4);
                v = fv;
            } else if (bits == 16) {
                v = double(std::int16_t(p[0] | p[1] << 8)) / 32768.0;
            } else if (bits == 24) {
                std::int32_t s = p[0] | p[1] << 8 | p[2] << 16;
                if (s & 0x800000) s |= ~0xffffff; // sign extend
                v = double(s) / 8388608.0;
            } else {
                v = double(std::int32_t(read_u32(p))) / 2147483648.0;
            }
            acc += v;
        }
        clip.samples[i] = float(acc * inv_ch);
    }
    return clip;
}

void save_wav(const std::string& path, const AudioClip& clip, bool as_float) {
    if (clip.samples.empty() || clip.sample_rate <= 0)
        throw ValidationError("save_wav: empty clip or bad rate");
    const std::uint16_t bits = as_float ? 32 : 16;
    const std::uint32_t n = std::uint32_t(clip.samples.size());
    const std::uint32_t data_len = n * (bits / 8);

    std::string out;
    out.reserve(44 + data_len);
    out += "RIFF";
    put_u32(out, 36 + data_len);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, as_float ? 3 : 1);
    put_u16(out, 1); // mono
    put_u32(out, std::uint32_t(clip.sample_rate));
    put_u32(out, std::uint32_t(clip.sample_rate) * (bits / 8));
    put_u16(out, bits / 8);
    put_u16(out, bits);
    out += "data";
    put_u32(out, data_len);
    for (float s : clip.samples) {
        if (as_float) {
            std::uint32_t u;
            std::memcpy(&u, &s, 4);
            put_u32(out, u);
        } else {
            float c = s < -1.0f ? -1.0f : (s > 1.0f ? 1.0f : s);
            int v = int(c * 32767.0f);
            put_u16(out, std::uint16_t(std::int16_t(v)));
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("save_wav: cannot open " + path + " for writing");
    f.write(out.data(), std::streamsize(out.size()));
}

} // namespace pesto
