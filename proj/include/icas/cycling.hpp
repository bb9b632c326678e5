#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icas/sim.hpp"
#include "icas/synthdata.hpp"

namespace icas::cycle {

struct ContentEmbeddingList {
    std::vector<sim::Embedding> items;   // non-empty, equal widths
    std::vector<std::string> origins;    // subject id / augmentation id per item

    std::size_t count() const { return items.size(); }
    void validate() const;
};

// Round-robin assignment of k embeddings over L content cross-attention
// sites: assignment[i] = i mod k.
struct CyclicSchedule {
    std::size_t num_sites = 0;
    std::vector<std::size_t> assignment;
};

// Errors on zero counts and on k > L (more subjects than attention sites).
CyclicSchedule build_schedule(std::size_t k, std::size_t num_sites);

const sim::Embedding& embedding_for_site(const CyclicSchedule& schedule,
                                         const ContentEmbeddingList& embeddings,
                                         std::size_t site);

enum class ExtractMode { Segmentation, Augmentation };

// Segmentation mode: one embedding per subject mask. Augmentation mode: the
// plain encoding plus horizontal-flip and mild color-jitter views.
ContentEmbeddingList extract_content_embeddings(const synth::SyntheticImage& image,
                                                ExtractMode mode,
                                                const synth::Encoders& encoders);

}  // namespace icas::cycle
