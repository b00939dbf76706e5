# Gunicorn configuration for the DKPABE authority service
import os

# Server socket
_listen = os.environ.get('DKPABE_LISTEN', '0.0.0.0:5000')
bind = f"0.0.0.0:{os.environ['PORT']}" if os.environ.get('PORT') else _listen
backlog = 2048

# Worker processes
# Issuing sessions live in memory: one worker, threads for concurrent users
workers = 1
worker_class = "gthread"
threads = int(os.environ.get('DKPABE_THREADS', '8'))
timeout = 120
graceful_timeout = 60
keepalive = 2

# Logging
accesslog = "-"
errorlog = "-"
loglevel = "info"
access_log_format = '%(h)s %(l)s %(u)s %(t)s "%(r)s" %(s)s %(b)s "%(a)s"'

# Process naming
proc_name = "dkpabe-authority"

# Server mechanics
preload_app = True
daemon = False
pidfile = None
user = None
group = None
tmp_upload_dir = None

# TLS is terminated by the platform (Render); set these when serving directly
keyfile = os.environ.get('DKPABE_TLS_KEY')
certfile = os.environ.get('DKPABE_TLS_CERT')
