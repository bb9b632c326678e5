#include "icas/cycling.hpp"

#include <stdexcept>

namespace icas::cycle {

using num::ShapeError;

void ContentEmbeddingList::validate() const {
    if (items.empty())
        throw ShapeError("content embedding list: must be non-empty");
    const std::size_t d = items.front().width();
    for (const auto& e : items)
        if (e.width() != d)
            throw ShapeError("content embedding list: mixed widths");
}

CyclicSchedule build_schedule(std::size_t k, std::size_t num_sites) {
    if (k == 0 || num_sites == 0)
        throw ShapeError("build_schedule: counts must be >= 1 (k=" +
                         std::to_string(k) + ", L=" + std::to_string(num_sites) + ")");
    if (k > num_sites)
        throw ShapeError("build_schedule: more embeddings (" + std::to_string(k) +
                         ") than attention sites (" + std::to_string(num_sites) +
                         "); some subjects would never be injected");
    CyclicSchedule s;
    s.num_sites = num_sites;
    s.assignment.resize(num_sites);
    for (std::size_t i = 0; i < num_sites; ++i) s.assignment[i] = i % k;
    return s;
}

const sim::Embedding& embedding_for_site(const CyclicSchedule& schedule,
                                         const ContentEmbeddingList& embeddings,
                                         std::size_t site) {
    if (site >= schedule.num_sites)
        throw ShapeError("embedding_for_site: site " + std::to_string(site) +
                         " out of range (L=" + std::to_string(schedule.num_sites) + ")");
    return embeddings.items[schedule.assignment[site]];
}

ContentEmbeddingList extract_content_embeddings(const synth::SyntheticImage& image,
                                                ExtractMode mode,
                                                const synth::Encoders& encoders) {
    ContentEmbeddingList out;
    if (mode == ExtractMode::Segmentation) {
        if (image.subject_masks.empty())
            throw ShapeError("extract_content_embeddings: no subject masks");
        for (std::size_t s = 0; s < image.subject_masks.size(); ++s) {
            out.items.push_back(synth::encode_content_masked(
                image.image, image.subject_masks[s], encoders));
            out.origins.push_back("subject:" + std::to_string(s));
        }
    } else {
        out.items.push_back(synth::encode_content(image.image, encoders));
        out.origins.push_back("aug:identity");
        out.items.push_back(
            synth::encode_content(synth::flip_horizontal(image.image), encoders));
        out.origins.push_back("aug:hflip");
        out.items.push_back(synth::encode_content(
            synth::color_jitter(image.image, 0.05, image.seed ^ 0xa06u), encoders));
        out.origins.push_back("aug:jitter");
    }
    out.validate();
    return out;
}

}  // namespace icas::cycle
