#pragma once

// Everything except the HTTP layer (bact/service.hpp), which pulls in httplib.

#include "bact/acquisition.hpp"
#include "bact/al_loop.hpp"
#include "bact/annotator.hpp"
#include "bact/common.hpp"
#include "bact/config.hpp"
#include "bact/dataset.hpp"
#include "bact/dataset_io.hpp"
#include "bact/labeled_set.hpp"
#include "bact/metrics.hpp"
#include "bact/predictor.hpp"
#include "bact/results.hpp"
#include "bact/session.hpp"
#include "bact/uncertainty.hpp"
