#pragma once

#include "pisim/errors.hpp"

#include "pisim/netarch/arch_format.hpp"
#include "pisim/netarch/counts.hpp"
#include "pisim/netarch/network.hpp"
#include "pisim/netarch/presets.hpp"
#include "pisim/netarch/segments.hpp"

#include "pisim/cost/calibrate.hpp"
#include "pisim/cost/model.hpp"
#include "pisim/cost/nnls.hpp"
#include "pisim/cost/tables.hpp"

#include "pisim/proto/channel.hpp"
#include "pisim/proto/field.hpp"
#include "pisim/proto/linear.hpp"
#include "pisim/proto/protocol.hpp"
#include "pisim/proto/share.hpp"
#include "pisim/proto/standins.hpp"
#include "pisim/proto/transcript.hpp"
#include "pisim/proto/weights.hpp"

#include "pisim/sim/arrivals.hpp"
#include "pisim/sim/config.hpp"
#include "pisim/sim/export.hpp"
#include "pisim/sim/ledger.hpp"
#include "pisim/sim/runner.hpp"
#include "pisim/sim/simulator.hpp"

#include "pisim/cli/experiment.hpp"
#include "pisim/cli/resolve.hpp"
