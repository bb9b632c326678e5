#include "icas/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "icas/rng.hpp"

namespace icas::synth {

using num::ShapeError;
using num::Tensor;

namespace {
double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

const std::array<std::array<double, 3>, 6> kSubjectColors = {{
    {0.90, 0.15, 0.15},
    {0.15, 0.20, 0.90},
    {0.10, 0.75, 0.20},
    {0.95, 0.80, 0.10},
    {0.75, 0.15, 0.85},
    {0.10, 0.80, 0.80},
}};

bool inside_subject(const SubjectInfo& s, double x, double y) {
    const double dx = x - s.cx, dy = y - s.cy;
    switch (s.shape) {
        case SubjectShape::Disk:
            return dx * dx + dy * dy <= s.radius * s.radius;
        case SubjectShape::Square:
            return std::fabs(dx) <= s.radius * 0.9 && std::fabs(dy) <= s.radius * 0.9;
        case SubjectShape::Triangle:
            // upright triangle inscribed in the radius
            return dy >= -s.radius && dy <= s.radius &&
                   std::fabs(dx) <= (s.radius - 0.5 * (dy + s.radius)) * 0.9;
    }
    return false;
}

// Pooled statistics feeding the frozen encoders: per-channel mean and std,
// mean edge magnitude, and an 8-bin grayscale histogram.
std::vector<double> pooled_stats(const Image& img, const Mask* mask) {
    std::vector<double> stats(Encoders::kStatDim, 0.0);
    const auto edges = edge_map(img);
    double count = 0.0;
    std::array<double, 3> sum{}, sumsq{};
    double edge_sum = 0.0;
    std::array<double, 8> hist{};
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            const std::size_t i = y * img.width + x;
            if (mask && !(*mask)[i]) continue;
            count += 1.0;
            double gray = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = img.at(y, x, c);
                sum[c] += v;
                sumsq[c] += v * v;
                gray += v / 3.0;
            }
            edge_sum += edges[i];
            const auto bin = std::min<std::size_t>(7, static_cast<std::size_t>(gray * 8.0));
            hist[bin] += 1.0;
        }
    if (count == 0.0) throw ShapeError("encode: empty mask");
    for (std::size_t c = 0; c < 3; ++c) {
        const double m = sum[c] / count;
        stats[c] = m;
        stats[3 + c] = std::sqrt(std::max(0.0, sumsq[c] / count - m * m));
    }
    stats[6] = edge_sum / count;
    for (std::size_t b = 0; b < 8; ++b) stats[7 + b] = hist[b] / count;
    return stats;
}

sim::Embedding project_stats(const std::vector<double>& stats,
                             const std::vector<double>& proj, std::size_t dim) {
    std::vector<double> out(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < Encoders::kStatDim; ++j)
            out[i] += proj[i * Encoders::kStatDim + j] * stats[j];
    return sim::Embedding{Tensor({dim}, std::move(out))};
}
}  // namespace

Image Image::filled(std::size_t w, std::size_t h, double r, double g, double b) {
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.resize(w * h * 3);
    for (std::size_t i = 0; i < w * h; ++i) {
        img.pixels[i * 3] = r;
        img.pixels[i * 3 + 1] = g;
        img.pixels[i * 3 + 2] = b;
    }
    return img;
}

StyleSpec StyleSpec::from_seed(std::uint64_t seed) {
    util::Rng rng(seed ^ 0x5757575757575757ull);
    StyleSpec s;
    s.seed = seed;
    for (auto& anchor : s.palette)
        for (auto& c : anchor) c = rng.uniform(0.05, 0.95);
    s.texture_freq = rng.uniform(2.0, 6.0);
    s.contrast = rng.uniform(0.6, 1.0);
    return s;
}

SyntheticImage gen_content(std::uint64_t seed, std::size_t n_subjects,
                           std::size_t size) {
    if (n_subjects < 1 || n_subjects > 4)
        throw ShapeError("gen_content: n_subjects must be in [1,4], got " +
                         std::to_string(n_subjects));
    util::Rng rng(seed);
    SyntheticImage out;
    out.seed = seed;
    out.image.width = size;
    out.image.height = size;
    out.image.pixels.resize(size * size * 3);

    // textured background
    const double base = rng.uniform(0.35, 0.55);
    const double tex_freq = rng.uniform(2.0, 4.0);
    const double tex_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double t = 0.04 * std::sin(tex_freq * 2.0 * std::numbers::pi *
                                                 (double(x) + double(y)) / double(size) +
                                             tex_phase);
            for (std::size_t c = 0; c < 3; ++c)
                out.image.at(y, x, c) = clamp01(base + t + 0.02 * double(c));
        }

    // place non-overlapping subjects
    const double rmin = double(size) / 8.0, rmax = double(size) / 5.5;
    std::size_t color_offset = rng.integer(0, kSubjectColors.size() - 1);
    for (std::size_t s = 0; s < n_subjects; ++s) {
        SubjectInfo subj;
        subj.shape = static_cast<SubjectShape>((s + seed) % 3);
        subj.color = kSubjectColors[(color_offset + s) % kSubjectColors.size()];
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            subj.radius = rng.uniform(rmin, rmax);
            subj.cx = rng.uniform(subj.radius + 1.0, double(size) - subj.radius - 1.0);
            subj.cy = rng.uniform(subj.radius + 1.0, double(size) - subj.radius - 1.0);
            placed = true;
            for (const auto& other : out.subjects) {
                const double dx = subj.cx - other.cx, dy = subj.cy - other.cy;
                const double min_sep = subj.radius + other.radius + 2.0;
                if (dx * dx + dy * dy < min_sep * min_sep) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed)
            throw ShapeError("gen_content: could not place subject " +
                             std::to_string(s) + " after bounded retries");
        out.subjects.push_back(subj);
    }

    for (const auto& subj : out.subjects) {
        Mask mask(size * size, 0);
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x)
                if (inside_subject(subj, double(x) + 0.5, double(y) + 0.5)) {
                    mask[y * size + x] = 1;
                    for (std::size_t c = 0; c < 3; ++c)
                        out.image.at(y, x, c) = subj.color[c];
                }
        out.subject_masks.push_back(std::move(mask));
    }
    return out;
}

Image render_style(const StyleSpec& spec, std::size_t size) {
    util::Rng rng(spec.seed ^ 0x1212121212121212ull);
    const double phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Image img;
    img.width = size;
    img.height = size;
    img.pixels.resize(size * size * 3);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double u = double(x) / double(size), v = double(y) / double(size);
            double t1 = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * spec.texture_freq *
                                                 (u + 0.6 * v) + phase1);
            double t2 = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * spec.texture_freq *
                                                 (v - 0.4 * u) + phase2);
            t1 = 0.5 + spec.contrast * (t1 - 0.5);
            t2 = 0.5 + spec.contrast * (t2 - 0.5);
            // barycentric blend over the three palette anchors
            const double w0 = (1.0 - t1) * (1.0 - t2), w1 = t1 * (1.0 - t2),
                         w2 = t2;
            const double wsum = w0 + w1 + w2;
            for (std::size_t c = 0; c < 3; ++c)
                img.at(y, x, c) = clamp01((w0 * spec.palette[0][c] +
                                           w1 * spec.palette[1][c] +
                                           w2 * spec.palette[2][c]) /
                                          wsum);
        }
    return img;
}

Encoders Encoders::make(std::size_t embed_dim, std::size_t structure_channels,
                        std::uint64_t seed) {
    if (embed_dim < 4) throw ShapeError("encoders: embed_dim must be >= 4");
    util::Rng rng(seed ^ 0xe27c0de5ull);
    Encoders e;
    e.embed_dim = embed_dim;
    e.structure_channels = structure_channels;
    const double std = 1.0 / std::sqrt(double(kStatDim));
    e.content_proj = rng.normal_vec(embed_dim * kStatDim, std);
    e.style_proj = rng.normal_vec(embed_dim * kStatDim, std);
    e.latent_proj = rng.normal_vec((embed_dim - 3) * kStatDim, std);
    return e;
}

sim::Embedding encode_content(const Image& image, const Encoders& enc) {
    return project_stats(pooled_stats(image, nullptr), enc.content_proj, enc.embed_dim);
}

sim::Embedding encode_content_masked(const Image& image, const Mask& mask,
                                     const Encoders& enc) {
    return project_stats(pooled_stats(image, &mask), enc.content_proj, enc.embed_dim);
}

sim::Embedding encode_style(const Image& image, const Encoders& enc) {
    return project_stats(pooled_stats(image, nullptr), enc.style_proj, enc.embed_dim);
}

spm::StructureCondition encode_structure(const Image& image, const Encoders& enc,
                                         std::size_t latent_h, std::size_t latent_w) {
    const auto edges = edge_map(image);
    double edge_max = 0.0;
    for (double e : edges) edge_max = std::max(edge_max, e);
    const std::size_t by = image.height / latent_h, bx = image.width / latent_w;
    if (by == 0 || bx == 0)
        throw ShapeError("encode_structure: image smaller than latent grid");
    std::vector<double> feat(latent_h * latent_w * enc.structure_channels, 0.0);
    for (std::size_t cy = 0; cy < latent_h; ++cy)
        for (std::size_t cx = 0; cx < latent_w; ++cx) {
            double mean_e = 0.0, max_e = 0.0, occupancy = 0.0, n = 0.0;
            for (std::size_t y = cy * by; y < (cy + 1) * by; ++y)
                for (std::size_t x = cx * bx; x < (cx + 1) * bx; ++x) {
                    const double e = edges[y * image.width + x];
                    mean_e += e;
                    max_e = std::max(max_e, e);
                    if (edge_max > 0.0 && e > 0.1 * edge_max) occupancy += 1.0;
                    n += 1.0;
                }
            double* cell = &feat[(cy * latent_w + cx) * enc.structure_channels];
            cell[0] = clamp01(mean_e / n);
            if (enc.structure_channels > 1) cell[1] = clamp01(max_e);
            if (enc.structure_channels > 2) cell[2] = occupancy / n;
        }
    spm::StructureCondition cond;
    cond.feat = Tensor({latent_h * latent_w, enc.structure_channels}, std::move(feat));
    cond.height = latent_h;
    cond.width = latent_w;
    return cond;
}

num::Tensor encode_latent(const Image& image, const Encoders& enc,
                          std::size_t latent_h, std::size_t latent_w,
                          std::size_t width) {
    if (width != enc.embed_dim)
        throw ShapeError("encode_latent: latent width must equal encoder embed_dim");
    const std::size_t by = image.height / latent_h, bx = image.width / latent_w;
    if (by == 0 || bx == 0)
        throw ShapeError("encode_latent: image smaller than latent grid");
    std::vector<double> latent(latent_h * latent_w * width, 0.0);
    for (std::size_t cy = 0; cy < latent_h; ++cy)
        for (std::size_t cx = 0; cx < latent_w; ++cx) {
            // per-patch image for stats; small and only built once per cell
            Image patch;
            patch.width = bx;
            patch.height = by;
            patch.pixels.resize(bx * by * 3);
            std::array<double, 3> mean{};
            for (std::size_t y = 0; y < by; ++y)
                for (std::size_t x = 0; x < bx; ++x)
                    for (std::size_t c = 0; c < 3; ++c) {
                        const double v = image.at(cy * by + y, cx * bx + x, c);
                        patch.at(y, x, c) = v;
                        mean[c] += v / double(bx * by);
                    }
            double* cell = &latent[(cy * latent_w + cx) * width];
            for (std::size_t c = 0; c < 3; ++c) cell[c] = 2.0 * (mean[c] - 0.5);
            const auto stats = pooled_stats(patch, nullptr);
            for (std::size_t i = 0; i + 3 < width; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < Encoders::kStatDim; ++j)
                    acc += enc.latent_proj[i * Encoders::kStatDim + j] * stats[j];
                cell[3 + i] = 0.5 * acc;
            }
        }
    return Tensor({latent_h * latent_w, width}, std::move(latent));
}

std::vector<double> edge_map(const Image& image) {
    const std::size_t w = image.width, h = image.height;
    std::vector<double> gray(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            gray[y * w + x] =
                (image.at(y, x, 0) + image.at(y, x, 1) + image.at(y, x, 2)) / 3.0;
    std::vector<double> edges(w * h, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = x + 1 < w ? gray[y * w + x + 1] - gray[y * w + x] : 0.0;
            const double dy = y + 1 < h ? gray[(y + 1) * w + x] - gray[y * w + x] : 0.0;
            edges[y * w + x] = std::sqrt(dx * dx + dy * dy);
        }
    return edges;
}

Image downsample(const Image& image, std::size_t new_w, std::size_t new_h) {
    const std::size_t by = image.height / new_h, bx = image.width / new_w;
    if (by == 0 || bx == 0) throw ShapeError("downsample: target larger than source");
    Image out;
    out.width = new_w;
    out.height = new_h;
    out.pixels.assign(new_w * new_h * 3, 0.0);
    for (std::size_t y = 0; y < new_h; ++y)
        for (std::size_t x = 0; x < new_w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (std::size_t yy = 0; yy < by; ++yy)
                    for (std::size_t xx = 0; xx < bx; ++xx)
                        acc += image.at(y * by + yy, x * bx + xx, c);
                out.at(y, x, c) = acc / double(by * bx);
            }
    return out;
}

Image upsample_nearest(const Image& image, std::size_t factor) {
    Image out;
    out.width = image.width * factor;
    out.height = image.height * factor;
    out.pixels.resize(out.width * out.height * 3);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                out.at(y, x, c) = image.at(y / factor, x / factor, c);
    return out;
}

Mask downsample_mask(const Mask& mask, std::size_t w, std::size_t h,
                     std::size_t new_w, std::size_t new_h) {
    const std::size_t by = h / new_h, bx = w / new_w;
    Mask out(new_w * new_h, 0);
    for (std::size_t y = 0; y < new_h; ++y)
        for (std::size_t x = 0; x < new_w; ++x) {
            std::size_t on = 0;
            for (std::size_t yy = 0; yy < by; ++yy)
                for (std::size_t xx = 0; xx < bx; ++xx)
                    on += mask[(y * by + yy) * w + (x * bx + xx)];
            out[y * new_w + x] = on * 2 >= by * bx ? 1 : 0;
        }
    return out;
}

Image flip_horizontal(const Image& image) {
    Image out = image;
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < image.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
    return out;
}

Image color_jitter(const Image& image, double amplitude, std::uint64_t seed) {
    util::Rng rng(seed);
    std::array<double, 3> offset;
    for (auto& o : offset) o = rng.uniform(-amplitude, amplitude);
    Image out = image;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = clamp01(out.pixels[i] + offset[i % 3]);
    return out;
}

double binary_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size()) throw ShapeError("binary_iou: size mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool av = a[i] != 0, bv = b[i] != 0;
        inter += av && bv;
        uni += av || bv;
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

namespace {
std::vector<std::uint8_t> binarize_edges(const std::vector<double>& edges) {
    double mx = 0.0;
    for (double e : edges) mx = std::max(mx, e);
    std::vector<std::uint8_t> out(edges.size(), 0);
    if (mx == 0.0) return out;
    for (std::size_t i = 0; i < edges.size(); ++i) out[i] = edges[i] > 0.1 * mx;
    return out;
}
}  // namespace

double metric_structure_alignment(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("structure_alignment: image size mismatch");
    return binary_iou(binarize_edges(edge_map(a)), binarize_edges(edge_map(b)));
}

double metric_style_distance(const Image& output, const Image& style_ref) {
    auto stats = [](const Image& img) {
        std::array<double, 6> s{};
        const double n = double(img.width * img.height);
        for (std::size_t c = 0; c < 3; ++c) {
            double sum = 0.0, sumsq = 0.0;
            for (std::size_t y = 0; y < img.height; ++y)
                for (std::size_t x = 0; x < img.width; ++x) {
                    const double v = img.at(y, x, c);
                    sum += v;
                    sumsq += v * v;
                }
            s[c] = sum / n;
            s[3 + c] = std::sqrt(std::max(0.0, sumsq / n - s[c] * s[c]));
        }
        return s;
    };
    const auto sa = stats(output), sb = stats(style_ref);
    double d2 = 0.0;
    for (std::size_t i = 0; i < 6; ++i) d2 += (sa[i] - sb[i]) * (sa[i] - sb[i]);
    return std::sqrt(d2);
}

std::vector<double> metric_subject_match(const Image& output,
                                         const SyntheticImage& content) {
    if (output.width != content.image.width || output.height != content.image.height)
        throw ShapeError("subject_match: image size mismatch");
    const auto eo = edge_map(output);
    const auto ec = edge_map(content.image);
    std::vector<double> scores;
    for (const auto& mask : content.subject_masks) {
        double n = 0.0, mo = 0.0, mc = 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) {
                n += 1.0;
                mo += eo[i];
                mc += ec[i];
            }
        if (n == 0.0) throw ShapeError("subject_match: empty mask");
        mo /= n;
        mc /= n;
        double cov = 0.0, vo = 0.0, vc = 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) {
                const double a = eo[i] - mo, b = ec[i] - mc;
                cov += a * b;
                vo += a * a;
                vc += b * b;
            }
        double score;
        if (vo == 0.0 && vc == 0.0)
            score = 1.0;
        else if (vo == 0.0 || vc == 0.0)
            score = 0.0;
        else
            score = cov / std::sqrt(vo * vc);
        scores.push_back(std::clamp(score, 0.0, 1.0));
    }
    return scores;
}

std::string ppm_bytes(const Image& image) {
    std::ostringstream os;
    os << "P6\n" << image.width << " " << image.height << "\n255\n";
    for (double v : image.pixels)
        os.put(static_cast<char>(
            static_cast<unsigned char>(std::lround(clamp01(v) * 255.0))));
    return os.str();
}

Image parse_ppm(const std::string& bytes) {
    std::istringstream is(bytes);
    std::string magic;
    std::size_t w, h, maxval;
    is >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255)
        throw ShapeError("parse_ppm: unsupported format");
    is.get();  // single whitespace after header
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.resize(w * h * 3);
    for (auto& v : img.pixels) {
        const int c = is.get();
        if (c < 0) throw ShapeError("parse_ppm: truncated payload");
        v = double(c) / 255.0;
    }
    return img;
}

std::string pgm_bytes(const Mask& mask, std::size_t w, std::size_t h) {
    std::ostringstream os;
    os << "P5\n" << w << " " << h << "\n255\n";
    for (auto m : mask) os.put(static_cast<char>(m ? 255 : 0));
    return os.str();
}

}  // namespace icas::synth
