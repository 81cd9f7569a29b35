#pragma once

#include "dia/abstraction.hpp"
#include "dia/config.hpp"
#include "dia/embedding.hpp"
#include "dia/error.hpp"
#include "dia/infotheory.hpp"
#include "dia/media.hpp"
#include "dia/opro.hpp"
#include "dia/pipeline.hpp"
#include "dia/quality.hpp"
#include "dia/report.hpp"
#include "dia/semspace.hpp"
#include "dia/sidecar.hpp"
#include "dia/vsds.hpp"
