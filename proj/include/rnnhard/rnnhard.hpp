#pragma once

#include "rnnhard/random.hpp"
#include "rnnhard/shape.hpp"
#include "rnnhard/csp.hpp"
#include "rnnhard/csp_io.hpp"
#include "rnnhard/gadget.hpp"
#include "rnnhard/network.hpp"
#include "rnnhard/distribution.hpp"
#include "rnnhard/transforms.hpp"
#include "rnnhard/serialize.hpp"
#include "rnnhard/stats.hpp"
#include "rnnhard/harness.hpp"
#include "rnnhard/pipeline.hpp"
#include "rnnhard/manifest.hpp"
