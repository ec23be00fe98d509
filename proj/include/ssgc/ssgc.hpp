#pragma once

#include "ssgc/cluster_eval.hpp"
#include "ssgc/config.hpp"
#include "ssgc/egael.hpp"
#include "ssgc/encoder.hpp"
#include "ssgc/gradcheck.hpp"
#include "ssgc/graph.hpp"
#include "ssgc/hsi_io.hpp"
#include "ssgc/objective.hpp"
#include "ssgc/optim.hpp"
#include "ssgc/pca.hpp"
#include "ssgc/pipeline.hpp"
#include "ssgc/superpixel.hpp"
#include "ssgc/synth.hpp"
