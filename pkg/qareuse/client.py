"""
HTTP client for remote Q&A dumps.

This module includes the DumpClient class which downloads a posts dump over
HTTP(S) with retry logic, so that ``ingest-qa`` accepts a URL wherever it
accepts a local file.
"""

import logging
import time
from pathlib import Path
from typing import Optional, Union
from urllib.parse import urlparse

import requests

from .config import config as default_config, Config
from .exceptions import DownloadError

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 20


def is_url(location: Union[str, Path]) -> bool:
    return urlparse(str(location)).scheme in ("http", "https")


class DumpClient:
    """
    Downloads dump files.

    Server errors (5xx) and connection failures are retried with exponential
    backoff; client errors (4xx) fail at once.

    :ivar settings: The configuration supplying timeouts and retry settings.
    :type settings: Config
    :ivar session: The session object used to handle HTTP requests.
    :type session: requests.Session
    """

    def __init__(self, settings: Optional[Config] = None,
                 session: Optional[requests.Session] = None):
        self.settings = settings or default_config
        self.settings.validate()
        self.session = session or self._create_session()

    def _create_session(self) -> requests.Session:
        """Create and configure HTTP session"""
        session = requests.Session()
        session.headers.update({'User-Agent': 'qareuse/0.1.0'})
        return session

    def _backoff(self, attempt: int) -> None:
        delay = self.settings.retry_delay * (self.settings.backoff_factor ** attempt)
        time.sleep(delay)

    def download(self, url: str, destination: Union[str, Path]) -> Path:
        """
        Download ``url`` into ``destination`` with retry logic

        Args:
            url: HTTP(S) location of the dump
            destination: File to write; a directory receives the URL's file name

        Returns:
            Path: The file written

        Raises:
            DownloadError: 4xx answer, or failure after the last retry
        """
        destination = Path(destination)
        if destination.is_dir():
            name = Path(urlparse(url).path).name or "Posts.xml"
            destination = destination / name
        partial = destination.with_name(destination.name + ".part")
        max_retries = self.settings.max_retries

        for attempt in range(max_retries + 1):
            try:
                with self.session.get(url, stream=True,
                                      timeout=self.settings.request_timeout) as response:
                    status_code = response.status_code
                    if not response.ok:
                        if status_code >= 500 and attempt < max_retries:
                            logger.warning("Server error %s for %s, retrying", status_code, url)
                            self._backoff(attempt)
                            continue
                        raise DownloadError(f"Download failed with HTTP {status_code}: {url}",
                                            status_code=status_code)

                    with open(partial, "wb") as handle:
                        for chunk in response.iter_content(chunk_size=CHUNK_SIZE):
                            if chunk:
                                handle.write(chunk)
                partial.replace(destination)
                logger.info("Downloaded %s to %s", url, destination)
                return destination

            except requests.RequestException as e:
                if attempt < max_retries:
                    logger.warning("Request for %s failed (%s), retrying", url, e)
                    self._backoff(attempt)
                    continue
                raise DownloadError(f"Request failed: {str(e)}")

        # This should never be reached, but just in case
        raise DownloadError("Maximum retries exceeded")
